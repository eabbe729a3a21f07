//! Parameter sequences of the smart rule: thresholds `eps_k`, confidences
//! `delta_k`, testing occupancies `N_k`, block sizes `a_k`, `b_k`, and update
//! times `n_k`, with the testing/labelling index blocks `A_k`, `B_k`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_function::{find_n, FindNOptions};

/// Sample size sufficient for every arc cut out by `k` random points to
/// receive at least `big_n` of the following points with confidence
/// `1 - delta`, for any law on the circle. Natural logarithms throughout.
pub fn vc_sample_size(k: u64, big_n: u64, delta: f64) -> Result<u64> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "the covering bound needs k >= 2, got {k}"
        )));
    }
    if big_n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} is outside (0, 1)")));
    }
    let pairs = (k * (k - 1)) as f64;
    // every arc has length at least eps with confidence 1 - delta/2
    let eps = delta / (2.0 * pairs);
    let vc_term = 48.0 / eps * (16.0 * std::f64::consts::E / eps).ln();
    let confidence_term = 8.0 / eps * (4.0 / delta).ln();
    // 2N/eps written without the intermediate eps to avoid an extra rounding
    let occupancy_term = 4.0 * big_n as f64 * pairs / delta;
    Ok(vc_term.max(confidence_term).max(occupancy_term).ceil() as u64)
}

/// Whether the schedule follows the exact recursion or a desk-scale surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Exact,
    Practical,
}

impl ScheduleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleMode::Exact => "exact",
            ScheduleMode::Practical => "practical",
        }
    }

    /// Header note attached to every output produced under this mode.
    pub fn disclaimer(self) -> &'static str {
        match self {
            ScheduleMode::Exact => {
                "exact schedule: N_k, a_k, b_k from the certified recursion; only small k are computable"
            }
            ScheduleMode::Practical => {
                "practical schedule: desk-scale surrogate block sizes, NOT the exact recursion (exact a_k, b_k explode)"
            }
        }
    }
}

/// Parameters of one stage `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    /// Minimum testing points per cell; unused at stage 1.
    pub test_min: Option<u64>,
    /// Size of the testing block `A_k`, also the labelling occupancy threshold.
    pub a: u64,
    /// Size of the labelling block `B_k`.
    pub b: u64,
    /// Update time `n_k`.
    pub n: u64,
}

/// A finite prefix of the stage sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    stages: Vec<Stage>,
}

impl Schedule {
    /// Assembles a schedule from per-stage sequences indexed from `k = 1`.
    /// `a_1 = 0`, `b_1 = 1`, `n_1 = 1` are imposed; `test_min[0]` is ignored.
    pub fn from_sequences(
        mode: ScheduleMode,
        eps: &[f64],
        delta: &[f64],
        test_min: &[u64],
        a: &[u64],
        b: &[u64],
    ) -> Result<Self> {
        let len = eps.len();
        if len == 0 {
            return Err(Error::InvalidArgument("a schedule needs at least one stage".into()));
        }
        for (name, l) in [("delta", delta.len()), ("N", test_min.len()), ("a", a.len()), ("b", b.len())] {
            if l != len {
                return Err(Error::InvalidArgument(format!(
                    "sequence {name} has {l} entries, eps has {len}"
                )));
            }
        }
        if !eps.iter().all(|e| *e > 0.0 && *e < 0.5) {
            return Err(Error::InvalidArgument("every eps_k must lie in (0, 1/2)".into()));
        }
        if !delta.iter().all(|d| *d > 0.0 && *d < 1.0) {
            return Err(Error::InvalidArgument("every delta_k must lie in (0, 1)".into()));
        }
        let mut stages = Vec::with_capacity(len);
        let mut n = 1u64;
        stages.push(Stage {
            k: 1,
            eps: eps[0],
            delta: delta[0],
            test_min: None,
            a: 0,
            b: 1,
            n,
        });
        for i in 1..len {
            if a[i] == 0 || b[i] == 0 || test_min[i] == 0 {
                return Err(Error::InvalidArgument(format!(
                    "stage {} needs positive N, a, b",
                    i + 1
                )));
            }
            n += a[i] + b[i] + 1;
            stages.push(Stage {
                k: i + 1,
                eps: eps[i],
                delta: delta[i],
                test_min: Some(test_min[i]),
                a: a[i],
                b: b[i],
                n,
            });
        }
        Ok(Schedule { mode, stages })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Stage `k`, 1-based.
    pub fn stage(&self, k: usize) -> Option<&Stage> {
        k.checked_sub(1).and_then(|i| self.stages.get(i))
    }

    /// Update time of the last stage.
    pub fn horizon(&self) -> u64 {
        self.stages.last().map_or(0, |s| s.n)
    }

    /// `max { k : n_k <= n }`, or `None` when `n < 1`.
    pub fn stage_for(&self, n: u64) -> Option<usize> {
        let i = self.stages.partition_point(|s| s.n <= n);
        (i > 0).then_some(i)
    }

    /// Index of the candidate partition point revealed at stage `k >= 2`:
    /// `n_{k-1} + 1`.
    pub fn candidate_index(&self, k: usize) -> Option<u64> {
        if k < 2 {
            return None;
        }
        self.stage(k - 1).map(|s| s.n + 1)
    }

    /// Testing block `A_k` and labelling block `B_k` as inclusive 1-based
    /// index ranges. Empty blocks are empty ranges.
    pub fn blocks(&self, k: usize) -> Option<(RangeInclusive<u64>, RangeInclusive<u64>)> {
        let s = self.stage(k)?;
        if k == 1 {
            #[allow(clippy::reversed_empty_ranges)]
            return Some((1..=0, 1..=1));
        }
        let prev = self.stage(k - 1)?.n;
        let a = (prev + 2)..=(prev + s.a + 1);
        let b = (prev + s.a + 2)..=(prev + s.a + s.b + 1);
        Some((a, b))
    }
}

/// Default `eps_k = min(0.49, 1/(k+1))` and `delta_k = 2^-k`, for `k = 1..=stages`.
pub fn default_sequences(stages: usize) -> (Vec<f64>, Vec<f64>) {
    let eps = (1..=stages).map(|k| (1.0 / (k as f64 + 1.0)).min(0.49)).collect();
    let delta = (1..=stages).map(|k| 0.5f64.powi(k as i32)).collect();
    (eps, delta)
}

/// Outcome of [`exact_schedule`]: stages computed so far and, when the
/// recursion could not continue, why.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSchedule {
    pub schedule: Schedule,
    pub requested: usize,
    pub failure: Option<ExactFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactFailure {
    /// Stage whose `N_k` could not be certified.
    pub k: usize,
    pub error: Error,
}

/// The exact recursion `N_k = N(b_{k-1}, eps_k)`, `a_k = M(k, N_k, delta_k)`,
/// `b_k = M(k, a_k, delta_k)`. When `N_k` exceeds the search cap the
/// schedule is truncated before stage `k` and the failure is returned with it.
pub fn exact_schedule(
    stages: usize,
    eps: &[f64],
    delta: &[f64],
    options: &FindNOptions,
) -> Result<ExactSchedule> {
    if stages == 0 || eps.len() < stages || delta.len() < stages {
        return Err(Error::InvalidArgument(format!(
            "need eps and delta for {stages} stages"
        )));
    }
    check_rules(&eps[..stages], &delta[..stages])?;
    let mut t = vec![0u64];
    let mut a = vec![0u64];
    let mut b = vec![1u64];
    let mut failure = None;
    for k in 2..=stages {
        let i = k - 1;
        // a vote over an even count drops a point, so the largest odd
        // count an arc of the previous stage can vote over is what matters
        let votes = b[i - 1] - (1 - b[i - 1] % 2);
        let big_n = match find_n(votes, eps[i], options) {
            Ok(r) => r.big_n,
            Err(error) => {
                failure = Some(ExactFailure { k, error });
                break;
            }
        };
        let ak = vc_sample_size(k as u64, big_n, delta[i])?;
        let bk = vc_sample_size(k as u64, ak, delta[i])?;
        t.push(big_n);
        a.push(ak);
        b.push(bk);
    }
    let done = t.len();
    let schedule = Schedule::from_sequences(
        ScheduleMode::Exact,
        &eps[..done],
        &delta[..done],
        &t,
        &a,
        &b,
    )?;
    Ok(ExactSchedule {
        schedule,
        requested: stages,
        failure,
    })
}

fn check_rules(eps: &[f64], delta: &[f64]) -> Result<()> {
    if eps[0] >= 0.5 {
        return Err(Error::InvalidArgument("eps_1 must be below 1/2".into()));
    }
    if eps.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("eps_k must be non-increasing".into()));
    }
    if delta[0] >= 1.0 {
        return Err(Error::InvalidArgument("delta_1 must be below 1".into()));
    }
    Ok(())
}

/// Desk-scale block sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "growth", rename_all = "lowercase")]
pub enum PracticalParams {
    /// `a_k = ceil(a_scale r^k)`, `b_k` the smallest odd integer
    /// `>= b_scale r^k`, `N_k = test_min` for `k = 2..=stages`.
    Geometric {
        a_scale: f64,
        b_scale: f64,
        ratio: f64,
        stages: usize,
        test_min: u64,
    },
    /// `a_k = ceil(a_coef (k - 1)^a_power)`, `b_k = ceil(b_coef (k - 1)^b_power)`,
    /// `N_k = test_min` for `k = 2..=stages`. With `b_power = 2 a_power = 4`
    /// the labelling block keeps pace with the shrinking smallest cell.
    Polynomial {
        a_coef: f64,
        a_power: f64,
        b_coef: f64,
        b_power: f64,
        stages: usize,
        test_min: u64,
    },
    /// Explicit sequences for `k = 2..=K` (stage 1 is fixed).
    Explicit {
        a: Vec<u64>,
        b: Vec<u64>,
        test_min: Vec<u64>,
    },
}

/// A schedule with the structural invariants of the rule but block sizes
/// chosen for simulation rather than by the certified recursion.
/// `eps`/`delta` default to [`default_sequences`] when `None`.
pub fn practical_schedule(params: &PracticalParams, eps: Option<&[f64]>) -> Result<Schedule> {
    let (a, b, t) = match params {
        PracticalParams::Geometric {
            a_scale,
            b_scale,
            ratio,
            stages,
            test_min,
        } => {
            if !(*a_scale > 0.0 && *b_scale > 0.0 && *ratio > 0.0) || *stages == 0 || *test_min == 0 {
                return Err(Error::InvalidArgument(
                    "geometric growth parameters must be positive".into(),
                ));
            }
            let mut a = vec![0];
            let mut b = vec![1];
            let mut t = vec![0];
            for k in 2..=*stages {
                let scale = ratio.powi(k as i32);
                a.push((a_scale * scale).ceil() as u64);
                let bk = (b_scale * scale).ceil() as u64;
                b.push(if bk.is_multiple_of(2) { bk + 1 } else { bk });
                t.push(*test_min);
            }
            (a, b, t)
        }
        PracticalParams::Polynomial {
            a_coef,
            a_power,
            b_coef,
            b_power,
            stages,
            test_min,
        } => {
            if !(*a_coef > 0.0 && *b_coef > 0.0 && *a_power >= 0.0 && *b_power >= 0.0)
                || *stages == 0
                || *test_min == 0
            {
                return Err(Error::InvalidArgument(
                    "polynomial growth parameters must be positive".into(),
                ));
            }
            let mut a = vec![0];
            let mut b = vec![1];
            let mut t = vec![0];
            for k in 2..=*stages {
                let m = (k - 1) as f64;
                a.push((a_coef * m.powf(*a_power)).ceil() as u64);
                b.push((b_coef * m.powf(*b_power)).ceil() as u64);
                t.push(*test_min);
            }
            (a, b, t)
        }
        PracticalParams::Explicit { a, b, test_min } => {
            if a.len() != b.len() || a.len() != test_min.len() {
                return Err(Error::InvalidArgument(
                    "explicit a, b, test_min must have equal lengths".into(),
                ));
            }
            let mut full_a = vec![0];
            let mut full_b = vec![1];
            let mut full_t = vec![0];
            full_a.extend(a);
            full_b.extend(b);
            full_t.extend(test_min);
            (full_a, full_b, full_t)
        }
    };
    let stages = a.len();
    let (default_eps, delta) = default_sequences(stages);
    let eps = match eps {
        Some(e) if e.len() >= stages => e[..stages].to_vec(),
        Some(e) => {
            return Err(Error::InvalidArgument(format!(
                "{} eps values for {stages} stages",
                e.len()
            )))
        }
        None => default_eps,
    };
    Schedule::from_sequences(ScheduleMode::Practical, &eps, &delta, &t, &a, &b)
}
