//! Learning rules on the circle: the histogram (partitioning) rule, the smart
//! rule that refines its partition only where the testing block confirms
//! label diversity, and the baselines used for comparison.

use serde::{Deserialize, Serialize};

use crate::cyclic::{ArcPartition, CyclicPoint, HalfOpenArc};
use crate::error::{Error, Result};
use crate::problems::{Entry, Hypothesis, Label, LabeledSample};
use crate::schedule::Schedule;

/// Majority-vote labels per arc. Entries must be in increasing index order.
/// An even, non-empty cell drops its highest-indexed entry before voting; an
/// empty cell is labelled 1.
pub fn histogram_fit(partition: &ArcPartition, entries: &[Entry]) -> Hypothesis {
    let cells = partition.len();
    let mut ones = vec![0usize; cells];
    let mut count = vec![0usize; cells];
    let mut last = vec![0 as Label; cells];
    for e in entries {
        let c = partition.locate(e.point);
        count[c] += 1;
        ones[c] += e.label as usize;
        last[c] = e.label;
    }
    let labels = (0..cells)
        .map(|c| {
            let (mut n, mut o) = (count[c], ones[c]);
            if n == 0 {
                return 1;
            }
            if n % 2 == 0 {
                n -= 1;
                o -= last[c] as usize;
            }
            u8::from(2 * o > n)
        })
        .collect();
    Hypothesis {
        partition: partition.clone(),
        labels,
    }
}

/// Fraction of label-1 entries among those falling in `arc`, or `None` when
/// the arc holds no entries.
pub fn empirical_conditional(entries: &[Entry], arc: &HalfOpenArc) -> Option<f64> {
    let (mut n, mut ones) = (0usize, 0usize);
    for e in entries.iter().filter(|e| arc.contains(e.point)) {
        n += 1;
        ones += e.label as usize;
    }
    (n > 0).then(|| ones as f64 / n as f64)
}

/// Audit record of one stage of the smart rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Every cell of the candidate partition held at least `a_k` labelling points.
    pub labelling_gate: bool,
    /// Every cell of the current partition held at least `N_k` testing points.
    pub testing_gate: bool,
    /// Cells were tested for diversity (both gates passed and `k > 1`).
    pub tested: bool,
    pub arcs_diversified: Vec<HalfOpenArc>,
    pub arcs_frozen: Vec<HalfOpenArc>,
    /// `|Q|` after the stage.
    pub partitioning_points: usize,
    /// Hypothesis labels when the stage produced a new hypothesis.
    pub labels: Option<Vec<Label>>,
}

impl StageRecord {
    pub fn updated(&self) -> bool {
        self.labels.is_some()
    }
}

/// State of the smart rule after its first `stage()` stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleState {
    stage: usize,
    /// Partitioning set `Q`, sorted and deduplicated.
    partitioning: ArcPartition,
    /// Candidate points `x_{n_j + 1}` revealed so far, in order.
    candidates: Vec<CyclicPoint>,
    hypothesis: Option<Hypothesis>,
    last_update_stage: usize,
    log: Vec<StageRecord>,
}

impl Default for RuleState {
    fn default() -> Self {
        Self::new()
    }
}

impl RuleState {
    pub fn new() -> Self {
        RuleState {
            stage: 0,
            partitioning: ArcPartition::trivial(),
            candidates: Vec::new(),
            hypothesis: None,
            last_update_stage: 0,
            log: Vec::new(),
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// The partitioning set `Q`.
    pub fn partitioning_set(&self) -> &[CyclicPoint] {
        self.partitioning.points()
    }

    pub fn candidates(&self) -> &[CyclicPoint] {
        &self.candidates
    }

    pub fn hypothesis(&self) -> Option<&Hypothesis> {
        self.hypothesis.as_ref()
    }

    pub fn last_update_stage(&self) -> usize {
        self.last_update_stage
    }

    pub fn log(&self) -> &[StageRecord] {
        &self.log
    }

    /// Label of `x` under the current hypothesis; `None` before stage 1.
    pub fn predict(&self, x: CyclicPoint) -> Option<Label> {
        self.hypothesis.as_ref().map(|h| h.predict(x))
    }

    /// One stage of the rule, consuming `sigma` up to `n_i`. `i` must be the
    /// next stage. Only entries `n_{i-1} + 1 ..= n_i` are read, so `sigma` may
    /// be the whole prefix or just that window. The state is cloned; see
    /// [`RuleState::advance_in_place`].
    pub fn advance(&self, sigma: &LabeledSample, schedule: &Schedule, i: usize) -> Result<RuleState> {
        let mut next = self.clone();
        next.advance_in_place(sigma, schedule, i)?;
        Ok(next)
    }

    pub fn advance_in_place(&mut self, sigma: &LabeledSample, schedule: &Schedule, i: usize) -> Result<()> {
        if i != self.stage + 1 {
            return Err(Error::InvalidArgument(format!(
                "state is at stage {}, cannot run stage {i}",
                self.stage
            )));
        }
        let st = *schedule
            .stage(i)
            .ok_or_else(|| Error::InvalidArgument(format!("schedule has no stage {i}")))?;
        if (sigma.last_index() as u64) < st.n {
            return Err(Error::PrefixTooShort {
                stage: i,
                have: sigma.last_index(),
                need: st.n,
            });
        }
        let (a_block, b_block) = schedule.blocks(i).expect("stage exists");
        let testing = sigma.block(*a_block.start() as usize, *a_block.end() as usize);
        let labelling = sigma.block(*b_block.start() as usize, *b_block.end() as usize);

        if let Some(idx) = schedule.candidate_index(i) {
            let e = sigma.get(idx as usize).expect("prefix covers n_i");
            self.candidates.push(e.point);
        }
        let candidate_partition = ArcPartition::from_points(self.candidates.iter().copied());

        let labelling_gate = candidate_partition
            .occupancy(labelling.iter().map(|e| e.point))
            .iter()
            .all(|&c| c as u64 >= st.a);

        let current = &self.partitioning;
        let mut test_ones = vec![0usize; current.len()];
        let mut test_counts = vec![0usize; current.len()];
        for e in testing {
            let c = current.locate(e.point);
            test_counts[c] += 1;
            test_ones[c] += e.label as usize;
        }
        let testing_gate = i == 1
            || test_counts
                .iter()
                .all(|&c| c as u64 >= st.test_min.unwrap_or(0));

        let mut record = StageRecord {
            stage: i,
            labelling_gate,
            testing_gate,
            tested: false,
            arcs_diversified: Vec::new(),
            arcs_frozen: Vec::new(),
            partitioning_points: self.partitioning.points().len(),
            labels: None,
        };

        if labelling_gate && testing_gate {
            let mut refined: Vec<CyclicPoint> = self.partitioning.points().to_vec();
            if i > 1 {
                record.tested = true;
                for (c, arc) in current.arcs().into_iter().enumerate() {
                    let freq = (test_counts[c] > 0)
                        .then(|| test_ones[c] as f64 / test_counts[c] as f64);
                    match freq {
                        Some(f) if st.eps < f && f < 1.0 - st.eps => {
                            refined.extend(self.candidates.iter().filter(|x| arc.contains(**x)));
                            record.arcs_diversified.push(arc);
                        }
                        _ => record.arcs_frozen.push(arc),
                    }
                }
            }
            self.partitioning = ArcPartition::from_points(refined);
            let h = histogram_fit(&self.partitioning, labelling);
            record.labels = Some(h.labels.clone());
            record.partitioning_points = self.partitioning.points().len();
            self.hypothesis = Some(h);
            self.last_update_stage = i;
        }
        self.log.push(record);
        self.stage = i;
        Ok(())
    }
}

/// Free-function form of [`RuleState::advance`].
pub fn smart_rule_advance(
    state: &RuleState,
    sigma_prefix: &LabeledSample,
    schedule: &Schedule,
    i: usize,
) -> Result<RuleState> {
    state.advance(sigma_prefix, schedule, i)
}

/// Prediction of the smart rule state at `x`.
pub fn smart_rule_predict(state: &RuleState, x: CyclicPoint) -> Result<Label> {
    state
        .predict(x)
        .ok_or_else(|| Error::InvalidArgument("rule state has not run stage 1".into()))
}

/// The smart rule for a fixed schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartRule {
    pub schedule: Schedule,
}

impl SmartRule {
    pub fn new(schedule: Schedule) -> Self {
        SmartRule { schedule }
    }

    /// Runs every stage with `n_k <= n`, the hypothesis used at sample size `n`.
    pub fn fit_prefix(&self, sample: &LabeledSample, n: usize) -> Result<RuleState> {
        let mut state = RuleState::new();
        self.run_until(&mut state, sample, n)?;
        Ok(state)
    }

    pub fn fit(&self, sample: &LabeledSample) -> Result<RuleState> {
        self.fit_prefix(sample, sample.len())
    }

    /// Advances `state` through every remaining stage with `n_k <= n`.
    pub fn run_until(&self, state: &mut RuleState, sample: &LabeledSample, n: usize) -> Result<()> {
        if n > sample.len() {
            return Err(Error::InvalidArgument(format!(
                "prefix {n} is longer than the sample ({})",
                sample.len()
            )));
        }
        let last = self.schedule.stage_for(n as u64).unwrap_or(0);
        for i in state.stage() + 1..=last {
            state.advance_in_place(sample, &self.schedule, i)?;
        }
        Ok(())
    }
}

/// 1-NN label under the geodesic circle distance; ties go to the smallest index.
pub fn nn1_predict(entries: &[Entry], x: CyclicPoint) -> Result<Label> {
    let mut best: Option<(f64, &Entry)> = None;
    for e in entries {
        let d = e.point.circle_distance(x);
        if best.is_none_or(|(bd, be)| d < bd || (d == bd && e.index < be.index)) {
            best = Some((d, e));
        }
    }
    best.map(|(_, e)| e.label).ok_or(Error::EmptySample)
}

/// The 1-NN classifier written as an arc hypothesis: cells are bounded by
/// midpoints between consecutive distinct sample locations.
pub fn nn1_hypothesis(entries: &[Entry]) -> Result<Hypothesis> {
    if entries.is_empty() {
        return Err(Error::EmptySample);
    }
    // representative per location: the smallest index
    let mut reps: Vec<&Entry> = entries.iter().collect();
    reps.sort_by(|a, b| a.point.total_cmp(&b.point).then(a.index.cmp(&b.index)));
    reps.dedup_by(|b, a| a.point == b.point);
    let m = reps.len();
    if m == 1 {
        return Ok(Hypothesis::constant(reps[0].label));
    }
    // boundary j separates reps[j] from reps[j + 1]; the cell starting at
    // boundary j belongs to reps[j + 1]
    let mut bounds = Vec::with_capacity(m);
    for j in 0..m {
        let (l, r) = (reps[j], reps[(j + 1) % m]);
        let mid = CyclicPoint::wrap(l.point.position() + l.point.forward_distance(r.point) / 2.0);
        let mid = if l.index < r.index {
            CyclicPoint::wrap(mid.position().next_up())
        } else {
            mid
        };
        bounds.push((mid, r.label));
    }
    bounds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let partition = ArcPartition::from_points(bounds.iter().map(|b| b.0));
    if partition.points().len() != m {
        // coincident midpoints only arise from degenerate spacing
        let labels = partition
            .arcs()
            .iter()
            .map(|a| nn1_predict(entries, a.start))
            .collect::<Result<Vec<_>>>()?;
        return Hypothesis::new(partition, labels);
    }
    Hypothesis::new(partition, bounds.into_iter().map(|b| b.1).collect())
}

/// The rules available to the simulation harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Rule {
    Smart { schedule: Schedule },
    HistogramFixed { partition: ArcPartition },
    Nn1,
    Constant { label: Label },
}

impl Rule {
    pub fn id(&self) -> &'static str {
        match self {
            Rule::Smart { .. } => "smart",
            Rule::HistogramFixed { .. } => "histogram_fixed",
            Rule::Nn1 => "nn1",
            Rule::Constant { .. } => "constant",
        }
    }

    /// Hypotheses at each sample size in `ns` (ascending), all fitted to
    /// prefixes of the same sample.
    pub fn hypotheses_at(&self, sample: &LabeledSample, ns: &[usize]) -> Result<Vec<Hypothesis>> {
        match self {
            Rule::Smart { schedule } => {
                let rule = SmartRule::new(schedule.clone());
                let mut state = RuleState::new();
                ns.iter()
                    .map(|&n| {
                        rule.run_until(&mut state, sample, n)?;
                        state
                            .hypothesis()
                            .cloned()
                            .ok_or_else(|| Error::InvalidArgument("sample size must be at least 1".into()))
                    })
                    .collect()
            }
            Rule::HistogramFixed { partition } => Ok(ns
                .iter()
                .map(|&n| histogram_fit(partition, sample.prefix(n)))
                .collect()),
            Rule::Nn1 => ns.iter().map(|&n| nn1_hypothesis(sample.prefix(n))).collect(),
            Rule::Constant { label } => Ok(ns.iter().map(|_| Hypothesis::constant(*label)).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::LearningProblem;
    use crate::schedule::{practical_schedule, PracticalParams};

    fn pt(t: f64) -> CyclicPoint {
        CyclicPoint::new(t).unwrap()
    }

    fn sample_of(points: &[f64], labels: &[Label]) -> LabeledSample {
        LabeledSample::from_pairs(points.iter().zip(labels).map(|(&t, &y)| (pt(t), y)))
    }

    #[test]
    fn histogram_examples() {
        let trivial = ArcPartition::trivial();
        let s = sample_of(&[0.1, 0.2, 0.3], &[1, 0, 1]);
        assert_eq!(histogram_fit(&trivial, s.entries()).labels, vec![1]);
        let s = sample_of(&[0.1, 0.2, 0.3, 0.4], &[1, 0, 0, 1]);
        assert_eq!(histogram_fit(&trivial, s.entries()).labels, vec![0]);
        let two = ArcPartition::from_points(vec![pt(0.0), pt(0.5)]);
        let s = sample_of(&[0.1, 0.2], &[0, 0]);
        // second cell is empty
        assert_eq!(histogram_fit(&two, s.entries()).labels, vec![0, 1]);
        // even count of two with opposite labels: drop the later one
        let s = sample_of(&[0.6, 0.7], &[0, 1]);
        assert_eq!(histogram_fit(&two, s.entries()).labels, vec![1, 0]);
    }

    #[test]
    fn empirical_conditional_examples() {
        let s = sample_of(&[0.1, 0.2, 0.3, 0.9], &[1, 1, 0, 0]);
        let arc = HalfOpenArc::from_positions(0.0, 0.5).unwrap();
        assert_eq!(empirical_conditional(s.entries(), &arc), Some(2.0 / 3.0));
        let empty = HalfOpenArc::from_positions(0.5, 0.8).unwrap();
        assert_eq!(empirical_conditional(s.entries(), &empty), None);
        let s = sample_of(&[0.1, 0.2], &[1, 1]);
        assert_eq!(empirical_conditional(s.entries(), &arc), Some(1.0));
    }

    fn small_schedule() -> Schedule {
        practical_schedule(
            &PracticalParams::Explicit {
                a: vec![20, 40, 80],
                b: vec![41, 81, 161],
                test_min: vec![2, 2, 2],
            },
            None,
        )
        .unwrap()
    }

    #[test]
    fn stage_one_predicts_first_label() {
        let s = small_schedule();
        let sample = sample_of(&[0.3], &[1]);
        let state = smart_rule_advance(&RuleState::new(), &sample, &s, 1).unwrap();
        assert_eq!(state.hypothesis().unwrap(), &Hypothesis::constant(1));
        for t in [0.0, 0.3, 0.99] {
            assert_eq!(smart_rule_predict(&state, pt(t)).unwrap(), 1);
        }
        assert!(smart_rule_predict(&RuleState::new(), pt(0.1)).is_err());
    }

    #[test]
    fn advance_checks_order_and_prefix() {
        let s = small_schedule();
        let sample = sample_of(&[0.3, 0.4], &[1, 0]);
        assert!(RuleState::new().advance(&sample, &s, 2).is_err());
        let state = RuleState::new().advance(&sample, &s, 1).unwrap();
        assert!(matches!(
            state.advance(&sample, &s, 2),
            Err(Error::PrefixTooShort { stage: 2, .. })
        ));
    }

    #[test]
    fn all_zero_labels_never_refine() {
        let s = small_schedule();
        let p = LearningProblem::uniform(0.0).unwrap();
        let sample = p.sample(3, s.horizon() as usize);
        let state = SmartRule::new(s).fit(&sample).unwrap();
        assert!(state.partitioning_set().is_empty());
        assert_eq!(state.hypothesis().unwrap(), &Hypothesis::constant(0));
        assert!(state.log().iter().all(|r| r.arcs_diversified.is_empty()));
    }

    #[test]
    fn failing_gate_keeps_previous_hypothesis() {
        // a testing threshold larger than the testing block can never be met
        let s = practical_schedule(
            &PracticalParams::Explicit {
                a: vec![5],
                b: vec![5],
                test_min: vec![6],
            },
            None,
        )
        .unwrap();
        let p = LearningProblem::uniform(0.5).unwrap();
        let sample = p.sample(9, s.horizon() as usize);
        let rule = SmartRule::new(s);
        let one = rule.fit_prefix(&sample, 1).unwrap();
        let two = rule.fit(&sample).unwrap();
        assert!(!two.log()[1].testing_gate);
        assert_eq!(one.hypothesis(), two.hypothesis());
        assert_eq!(one.partitioning_set(), two.partitioning_set());
        assert_eq!(two.last_update_stage(), 1);
    }

    #[test]
    fn nn1_examples() {
        let s = sample_of(&[0.4], &[1]);
        assert_eq!(nn1_predict(s.entries(), pt(0.9)).unwrap(), 1);
        let s = sample_of(&[0.25, 0.75], &[0, 1]);
        assert_eq!(nn1_predict(s.entries(), pt(0.75)).unwrap(), 1);
        // 0.5 is equidistant; the lower index wins
        assert_eq!(nn1_predict(s.entries(), pt(0.5)).unwrap(), 0);
        assert_eq!(nn1_predict(s.entries(), pt(0.0)).unwrap(), 0);
        let s = sample_of(&[0.75, 0.25], &[1, 0]);
        assert_eq!(nn1_predict(s.entries(), pt(0.5)).unwrap(), 1);
        // wraparound distance
        let s = sample_of(&[0.95, 0.5], &[1, 0]);
        assert_eq!(nn1_predict(s.entries(), pt(0.05)).unwrap(), 1);
        assert_eq!(nn1_predict(&[], pt(0.1)), Err(Error::EmptySample));
    }

    #[test]
    fn nn1_hypothesis_agrees_with_predict() {
        let p = LearningProblem::uniform(0.5).unwrap();
        for seed in 0..20 {
            let s = p.sample(seed, 1 + (seed as usize % 7));
            let h = nn1_hypothesis(s.entries()).unwrap();
            for q in p.sample(1000 + seed, 200).entries() {
                assert_eq!(h.predict(q.point), nn1_predict(s.entries(), q.point).unwrap());
            }
        }
        let s = sample_of(&[0.25, 0.75], &[0, 1]);
        let h = nn1_hypothesis(s.entries()).unwrap();
        for t in [0.0, 0.5, 0.25] {
            assert_eq!(h.predict(pt(t)), 0);
        }
        assert_eq!(h.predict(pt(0.9)), 1);
        let s = sample_of(&[0.75, 0.25], &[1, 0]);
        let h = nn1_hypothesis(s.entries()).unwrap();
        for t in [0.0, 0.5, 0.75] {
            assert_eq!(h.predict(pt(t)), 1);
        }
    }
}
