//! Monte Carlo experiments and verification suites. Every risk is the exact
//! risk of a fitted hypothesis under the known problem, so the only
//! randomness left is the training sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cyclic::{ArcPartition, CyclicPoint};
use crate::error::{Error, Result};
use crate::error_function::{majority_error, monotone_gap, uniform_grid, KeyInequalityGrid};
use crate::problems::{Component, Entry, Hypothesis, Label, LabeledSample, LearningProblem};
use crate::rules::{empirical_conditional, histogram_fit, nn1_predict, Rule, RuleState};
use crate::schedule::{vc_sample_size, Schedule};

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under `master`: `splitmix64(master ^ splitmix64(trial))`.
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial))
}

pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, trial))
}

/// Mean and standard error of the mean by Welford's update, in slice order.
/// Constant input gives its value and a zero error exactly.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub mean_risk: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Mean exact risk of a rule as a function of the sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub problem_id: String,
    pub rule_id: String,
    pub schedule_id: String,
    pub seed: u64,
    pub bayes: f64,
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    /// Structural checks: risks in `[0, 1]`, nonnegative errors, and the
    /// Bayes error not above any point by more than six standard errors.
    pub fn check_invariants(&self) -> Result<()> {
        if self.bayes > 0.5 + 1e-12 {
            return Err(Error::InvalidArgument(format!("bayes error {} exceeds 1/2", self.bayes)));
        }
        for p in &self.points {
            if !(0.0..=1.0).contains(&p.mean_risk) || p.stderr < 0.0 {
                return Err(Error::InvalidArgument(format!("malformed curve point {p:?}")));
            }
            if self.bayes > p.mean_risk + 6.0 * p.stderr + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "mean risk {} at n = {} is below the bayes error {}",
                    p.mean_risk, p.n, self.bayes
                )));
            }
        }
        Ok(())
    }

    pub fn point(&self, n: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.n == n)
    }
}

fn schedule_id(rule: &Rule) -> String {
    match rule {
        Rule::Smart { schedule } => format!("{}:{}", schedule.mode.as_str(), schedule.len()),
        _ => "none".into(),
    }
}

fn check_sizes(ns: &[usize], trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sample sizes must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Exact risks of `rule` at each size in `ns`, one row per trial.
pub fn risk_matrix(
    problem: &LearningProblem,
    rule: &Rule,
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_sizes(ns, trials)?;
    let n_max = *ns.last().expect("non-empty");
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            if let Rule::Smart { schedule } = rule {
                return smart_rule_risks(problem, schedule, ns, &mut rng);
            }
            let sample = problem.sample_with(&mut rng, n_max);
            let hs = rule.hypotheses_at(&sample, ns)?;
            Ok(hs.iter().map(|h| problem.risk(h)).collect())
        })
        .collect()
}

/// Exact risks of the smart rule at each size in `ns`, drawing the sample
/// one stage window at a time. The draws coincide with those of a buffered
/// sample from the same generator, so the risks do too.
pub fn smart_rule_risks<R: Rng + ?Sized>(
    problem: &LearningProblem,
    schedule: &Schedule,
    ns: &[usize],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut state = RuleState::new();
    let mut drawn = 0u64;
    let mut risks = Vec::with_capacity(ns.len());
    for &n in ns {
        let last = schedule
            .stage_for(n as u64)
            .ok_or_else(|| Error::InvalidArgument("sample size must be at least 1".into()))?;
        for i in state.stage() + 1..=last {
            let upto = schedule.stage(i).expect("stage exists").n;
            let mut entries = Vec::with_capacity((upto - drawn) as usize);
            while drawn < upto {
                let (point, label) = problem.draw(rng);
                drawn += 1;
                entries.push(Entry {
                    index: drawn as usize,
                    point,
                    label,
                });
            }
            state.advance_in_place(&LabeledSample::from_entries(entries)?, schedule, i)?;
        }
        risks.push(problem.risk(state.hypothesis().expect("stage 1 has run")));
    }
    Ok(risks)
}

pub fn expected_error_curve(
    problem: &LearningProblem,
    rule: &Rule,
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ErrorCurve> {
    let risks = risk_matrix(problem, rule, ns, trials, seed)?;
    let points = ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let column: Vec<f64> = risks.iter().map(|r| r[j]).collect();
            let (mean_risk, stderr) = mean_stderr(&column);
            CurvePoint {
                n,
                mean_risk,
                stderr,
                trials,
            }
        })
        .collect();
    Ok(ErrorCurve {
        problem_id: problem.name().unwrap_or("unnamed").to_string(),
        rule_id: rule.id().to_string(),
        schedule_id: schedule_id(rule),
        seed,
        bayes: problem.bayes_error(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneStep {
    pub from_n: usize,
    pub to_n: usize,
    /// `mean(to) - mean(from)`; positive means the error went up.
    pub increase: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub problem_id: String,
    pub steps: Vec<MonotoneStep>,
    /// Largest `increase / sigma` over the steps with `sigma > 0`.
    pub max_z: f64,
    pub pass: bool,
}

/// Soft monotonicity of consecutive curve points: no increase beyond
/// `z` combined standard errors.
pub fn audit_monotonicity(curve: &ErrorCurve, z: f64) -> MonotonicityReport {
    let mut steps = Vec::new();
    let mut max_z = f64::NEG_INFINITY;
    let mut pass = true;
    for w in curve.points.windows(2) {
        let increase = w[1].mean_risk - w[0].mean_risk;
        let sigma = w[0].stderr.hypot(w[1].stderr);
        if sigma > 0.0 {
            max_z = max_z.max(increase / sigma);
        }
        pass &= increase <= z * sigma + 1e-12;
        steps.push(MonotoneStep {
            from_n: w[0].n,
            to_n: w[1].n,
            increase,
            sigma,
        });
    }
    MonotonicityReport {
        problem_id: curve.problem_id.clone(),
        steps,
        max_z,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n_max: u64,
    pub grid_size: usize,
    pub max_deviation: f64,
    pub worst_n: u64,
    pub worst_p: f64,
    /// Smallest `L(p, n) - L(p, n + 2)` seen; nonnegative up to rounding.
    pub min_decrease: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `L(p, n) - L(p, n + 2) = monotone_gap(p, n)` for odd `n <= n_max`.
pub fn verify_monotone_identity(n_max: u64, grid_size: usize) -> Result<IdentityReport> {
    if n_max.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must be odd")));
    }
    let tolerance = 1e-12;
    let grid = uniform_grid(grid_size);
    let mut report = IdentityReport {
        n_max,
        grid_size,
        max_deviation: 0.0,
        worst_n: 1,
        worst_p: 0.0,
        min_decrease: f64::INFINITY,
        tolerance,
        pass: true,
    };
    for n in (1..=n_max).step_by(2) {
        for &p in &grid {
            let drop = majority_error(p, n)? - majority_error(p, n + 2)?;
            let dev = (drop - monotone_gap(p, n)?).abs();
            if dev > report.max_deviation {
                report.max_deviation = dev;
                report.worst_n = n;
                report.worst_p = p;
            }
            report.min_decrease = report.min_decrease.min(drop);
        }
    }
    report.pass = report.max_deviation <= tolerance && report.min_decrease >= -tolerance;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInequalityReport {
    pub n: u64,
    pub t: f64,
    pub big_n: u64,
    pub grid_size: usize,
    pub slack: f64,
    /// Largest `lhs - rhs` over the grid.
    pub worst_margin: f64,
    pub worst_p: f64,
    pub pass: bool,
}

/// Grid check of `inside * env(p, N) + (1 - inside) * L(p, N) <= L(p, n) + slack`.
pub fn verify_key_inequality(n: u64, t: f64, big_n: u64, grid_size: usize) -> Result<KeyInequalityReport> {
    let slack = 1e-9;
    let g = KeyInequalityGrid::evaluate(n, t, big_n, grid_size)?;
    let (worst_margin, worst_p) = g.worst_excess();
    Ok(KeyInequalityReport {
        n,
        t,
        big_n,
        grid_size,
        slack,
        worst_margin,
        worst_p,
        pass: worst_margin <= slack,
    })
}

/// Setup of the cell-splitting experiment: a problem, the candidate
/// partition `P`, and the sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPieceConfig {
    pub problem: LearningProblem,
    pub cells: ArcPartition,
    /// Size of the sample fitted on the unsplit domain.
    pub n: usize,
    /// Size of the testing sample, and the occupancy required of `tau` per cell.
    pub big_n: usize,
    pub eps: f64,
    /// Size of the sample `tau` fitted on the chosen partition.
    pub tau_size: usize,
    pub trials: usize,
    pub seed: u64,
    /// Resampling attempts for `tau` per trial.
    pub cap: usize,
}

impl KeyPieceConfig {
    /// Two half-circle cells with conditional probabilities `2 p0` and `0`.
    pub fn two_cell(p0: f64, n: usize, big_n: usize, eps: f64, trials: usize, seed: u64) -> Result<Self> {
        let problem = LearningProblem::new(vec![
            Component::arc(0.0, 0.5, 0.5, 2.0 * p0)?,
            Component::arc(0.5, 0.0, 0.5, 0.0)?,
        ])?
        .with_name(format!("two_cell_p0={p0}"));
        Ok(KeyPieceConfig {
            problem,
            cells: ArcPartition::from_points([CyclicPoint::wrap(0.0), CyclicPoint::wrap(0.5)]),
            n,
            big_n,
            eps,
            tau_size: 2 * big_n,
            trials,
            seed,
            cap: 1000,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPieceReport {
    pub problem_id: String,
    pub n: usize,
    pub big_n: usize,
    pub eps: f64,
    pub tau_size: usize,
    pub trials: usize,
    pub seed: u64,
    /// Mean risk of the histogram on the tested partition, fitted to `tau`.
    pub mean_split: f64,
    pub se_split: f64,
    /// Mean risk of the one-cell histogram fitted to `sigma`.
    pub mean_trivial: f64,
    pub se_trivial: f64,
    pub split_rate: f64,
    pub increase: f64,
    pub sigma: f64,
    /// Trials whose `tau` never met the occupancy condition; excluded.
    pub cap_hits: usize,
    pub mean_attempts: f64,
    /// No increase beyond three combined standard errors.
    pub pass: bool,
    /// An increase of at least three combined standard errors.
    pub increase_detected: bool,
}

/// Simulates the protocol: fit one cell on `sigma`; test the whole domain on
/// `varsigma` and split into `cells` when its label frequency is in
/// `(eps, 1 - eps)`; fit the chosen partition on `tau`, resampled until every
/// cell of `cells` holds at least `big_n` of its points.
pub fn verify_key_piece(config: &KeyPieceConfig) -> Result<KeyPieceReport> {
    let c = config;
    if c.trials < 2 || c.n == 0 || c.big_n == 0 || c.tau_size == 0 {
        return Err(Error::InvalidArgument("key_piece needs n, N, |tau| >= 1 and >= 2 trials".into()));
    }
    if !(c.eps > 0.0 && c.eps < 0.5) {
        return Err(Error::InvalidArgument(format!("eps = {} is outside (0, 1/2)", c.eps)));
    }
    let trivial = ArcPartition::trivial();
    let whole = crate::cyclic::HalfOpenArc::full_circle();
    let outcomes: Vec<(f64, Option<f64>, bool, usize)> = (0..c.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(c.seed, t);
            let sigma = c.problem.sample_with(&mut rng, c.n);
            let risk_trivial = c.problem.risk(&histogram_fit(&trivial, sigma.entries()));
            let testing = c.problem.sample_with(&mut rng, c.big_n);
            let freq = empirical_conditional(testing.entries(), &whole).expect("testing sample is non-empty");
            let split = c.eps < freq && freq < 1.0 - c.eps;
            let q = if split { &c.cells } else { &trivial };
            for attempt in 1..=c.cap {
                let tau = c.problem.sample_with(&mut rng, c.tau_size);
                let occ = c.cells.occupancy(tau.entries().iter().map(|e| e.point));
                if occ.iter().all(|&k| k >= c.big_n) {
                    let risk = c.problem.risk(&histogram_fit(q, tau.entries()));
                    return (risk_trivial, Some(risk), split, attempt);
                }
            }
            (risk_trivial, None, split, c.cap)
        })
        .collect();
    let trivial_risks: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let split_risks: Vec<f64> = outcomes.iter().filter_map(|o| o.1).collect();
    let cap_hits = outcomes.len() - split_risks.len();
    let (mean_trivial, se_trivial) = mean_stderr(&trivial_risks);
    let (mean_split, se_split) = mean_stderr(&split_risks);
    let increase = mean_split - mean_trivial;
    let sigma = se_split.hypot(se_trivial);
    Ok(KeyPieceReport {
        problem_id: c.problem.name().unwrap_or("unnamed").to_string(),
        n: c.n,
        big_n: c.big_n,
        eps: c.eps,
        tau_size: c.tau_size,
        trials: c.trials,
        seed: c.seed,
        mean_split,
        se_split,
        mean_trivial,
        se_trivial,
        split_rate: outcomes.iter().filter(|o| o.2).count() as f64 / outcomes.len() as f64,
        increase,
        sigma,
        cap_hits,
        mean_attempts: outcomes.iter().map(|o| o.3 as f64).sum::<f64>() / outcomes.len() as f64,
        pass: cap_hits == 0 && increase <= 3.0 * sigma,
        increase_detected: cap_hits == 0 && increase >= 3.0 * sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub problem_id: String,
    pub k: u64,
    pub big_n: u64,
    pub delta: f64,
    /// Points drawn after the `k` partition points.
    pub m: u64,
    pub trials: usize,
    pub seed: u64,
    pub failures: usize,
    pub failure_rate: f64,
    /// `sqrt(delta (1 - delta) / trials)`.
    pub sigma: f64,
    pub pass: bool,
}

/// Empirical rate at which some arc cut out by `k` random points receives
/// fewer than `big_n` of the next `M(k, big_n, delta)` points.
pub fn verify_coverage(
    k: u64,
    big_n: u64,
    delta: f64,
    trials: usize,
    problem: &LearningProblem,
    seed: u64,
) -> Result<CoverageReport> {
    let m = vc_sample_size(k, big_n, delta)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let failed: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let partition = ArcPartition::from_points((0..k).map(|_| problem.draw(&mut rng).0));
            let mut occ = vec![0u64; partition.len()];
            for _ in 0..m {
                occ[partition.locate(problem.draw(&mut rng).0)] += 1;
            }
            occ.iter().any(|&c| c < big_n)
        })
        .collect();
    let failures = failed.iter().filter(|&&f| f).count();
    let failure_rate = failures as f64 / trials as f64;
    let sigma = (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok(CoverageReport {
        problem_id: problem.name().unwrap_or("unnamed").to_string(),
        k,
        big_n,
        delta,
        m,
        trials,
        seed,
        failures,
        failure_rate,
        sigma,
        pass: failure_rate <= delta + 3.0 * sigma,
    })
}

/// Two atoms, at 1/4 with mass `q` and conditional `p1`, and at 3/4 with
/// mass `1 - q` and conditional `p2`.
pub fn two_atom_problem(q: f64, p1: f64, p2: f64) -> Result<LearningProblem> {
    Ok(LearningProblem::new(vec![
        Component::atom(0.25, q, p1)?,
        Component::atom(0.75, 1.0 - q, p2)?,
    ])?
    .with_name(format!("two_atoms_q={q}_p1={p1}_p2={p2}")))
}

/// Expected risk of 1-NN trained on `n` points, by summing over every
/// sequence of locations and labels. The problem must be purely atomic.
pub fn nn1_exact_expected_risk(problem: &LearningProblem, n: usize) -> Result<f64> {
    let atoms: Vec<(CyclicPoint, f64, f64)> = problem
        .components()
        .iter()
        .map(|c| match c {
            Component::Atom { location, mass, eta } => Ok((*location, *mass, *eta)),
            Component::Arc { .. } => Err(Error::InvalidProblem("exact enumeration needs atoms only".into())),
        })
        .collect::<Result<_>>()?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let outcomes: Vec<(CyclicPoint, Label, f64)> = atoms
        .iter()
        .flat_map(|&(x, m, e)| [(x, 0, m * (1.0 - e)), (x, 1, m * e)])
        .filter(|o| o.2 > 0.0)
        .collect();
    let mut total = 0.0;
    let mut digits = vec![0usize; n];
    'outer: loop {
        let mut prob = 1.0;
        let entries: Vec<Entry> = digits
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                prob *= outcomes[d].2;
                Entry {
                    index: i + 1,
                    point: outcomes[d].0,
                    label: outcomes[d].1,
                }
            })
            .collect();
        let mut risk = 0.0;
        for &(x, m, e) in &atoms {
            risk += m * if nn1_predict(&entries, x)? == 1 { 1.0 - e } else { e };
        }
        total += prob * risk;
        for d in digits.iter_mut() {
            *d += 1;
            if *d < outcomes.len() {
                continue 'outer;
            }
            *d = 0;
        }
        break;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub seed: u64,
    pub candidates: usize,
    pub witnesses: usize,
    pub problem: Option<LearningProblem>,
    pub q: f64,
    pub p1: f64,
    pub p2: f64,
    pub el1: f64,
    pub el2: f64,
    pub pass: bool,
}

/// Searches two-atom problems on a grid of step 1/20 (then 1/100 if that
/// finds nothing) for one where 1-NN does strictly better with one sample
/// point than with two; returns the largest gap found.
///
/// The search is exhaustive; `seed` only tags the report.
pub fn nn_counterexample_search(seed: u64) -> Result<CounterexampleReport> {
    let mut report = CounterexampleReport {
        seed,
        candidates: 0,
        witnesses: 0,
        problem: None,
        q: f64::NAN,
        p1: f64::NAN,
        p2: f64::NAN,
        el1: f64::NAN,
        el2: f64::NAN,
        pass: false,
    };
    for steps in [20u32, 100] {
        let mut best_gap = 0.0;
        let values: Vec<f64> = (1..steps).map(|i| f64::from(i) / f64::from(steps)).collect();
        let etas: Vec<f64> = (0..=steps).map(|i| f64::from(i) / f64::from(steps)).collect();
        for &q in &values {
            for &p1 in &etas {
                for &p2 in &etas {
                    let problem = two_atom_problem(q, p1, p2)?;
                    let el1 = nn1_exact_expected_risk(&problem, 1)?;
                    let el2 = nn1_exact_expected_risk(&problem, 2)?;
                    report.candidates += 1;
                    if el1 < el2 {
                        report.witnesses += 1;
                        if el2 - el1 > best_gap {
                            best_gap = el2 - el1;
                            report.problem = Some(problem);
                            (report.q, report.p1, report.p2) = (q, p1, p2);
                            (report.el1, report.el2) = (el1, el2);
                        }
                    }
                }
            }
        }
        if report.problem.is_some() {
            report.pass = true;
            break;
        }
    }
    Ok(report)
}

/// A Monte Carlo estimate of `E risk` for 1-NN on a sample of size `n`,
/// used to cross-check the exact enumeration.
pub fn nn1_monte_carlo_risk(problem: &LearningProblem, n: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let risks = risk_matrix(problem, &Rule::Nn1, &[n], trials, seed)?;
    Ok(mean_stderr(&risks.iter().map(|r| r[0]).collect::<Vec<_>>()))
}

/// Constant-label hypothesis risk: `P[Y != label]`.
pub fn constant_risk(problem: &LearningProblem, label: Label) -> f64 {
    problem.risk(&Hypothesis::constant(label))
}
