//! Labelled distributions `(mu, eta)` on the circle built from atoms and
//! uniform arcs with a constant regression value on each component, together
//! with labelled samples and arc-piecewise hypotheses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cyclic::{ArcPartition, CyclicPoint, HalfOpenArc};
use crate::error::{Error, Result};

/// Binary label, `0` or `1`.
pub type Label = u8;

const MASS_TOLERANCE: f64 = 1e-12;

/// One mixture component of a [`LearningProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Component {
    Atom {
        location: CyclicPoint,
        mass: f64,
        eta: f64,
    },
    Arc {
        #[serde(flatten)]
        arc: HalfOpenArc,
        mass: f64,
        eta: f64,
    },
}

impl Component {
    pub fn atom(location: f64, mass: f64, eta: f64) -> Result<Self> {
        Ok(Component::Atom {
            location: CyclicPoint::new(location)?,
            mass,
            eta,
        })
    }

    pub fn arc(start: f64, end: f64, mass: f64, eta: f64) -> Result<Self> {
        Ok(Component::Arc {
            arc: HalfOpenArc::from_positions(start, end)?,
            mass,
            eta,
        })
    }

    pub fn mass(&self) -> f64 {
        match self {
            Component::Atom { mass, .. } | Component::Arc { mass, .. } => *mass,
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            Component::Atom { eta, .. } | Component::Arc { eta, .. } => *eta,
        }
    }

    /// Mass this component puts on `arc`.
    fn mass_in(&self, query: &HalfOpenArc) -> f64 {
        match self {
            Component::Atom { location, mass, .. } => {
                if query.contains(*location) {
                    *mass
                } else {
                    0.0
                }
            }
            Component::Arc { arc, mass, .. } => {
                if query.is_full() {
                    *mass
                } else {
                    mass * arc.overlap_length(query) / arc.length()
                }
            }
        }
    }
}

/// A learning problem on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem", into = "RawProblem")]
pub struct LearningProblem {
    name: Option<String>,
    components: Vec<Component>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawProblem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    components: Vec<Component>,
}

impl TryFrom<RawProblem> for LearningProblem {
    type Error = Error;
    fn try_from(raw: RawProblem) -> Result<Self> {
        let mut p = LearningProblem::new(raw.components)?;
        p.name = raw.name;
        Ok(p)
    }
}

impl From<LearningProblem> for RawProblem {
    fn from(p: LearningProblem) -> Self {
        RawProblem {
            name: p.name,
            components: p.components,
        }
    }
}

impl LearningProblem {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidProblem("no components".into()));
        }
        let mut total = 0.0;
        for c in &components {
            let (m, e) = (c.mass(), c.eta());
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidProblem(format!("component mass {m} is not positive")));
            }
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidProblem(format!("eta {e} is outside [0, 1]")));
            }
            total += m;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidProblem(format!("masses sum to {total}, not 1")));
        }
        let arcs: Vec<&HalfOpenArc> = components
            .iter()
            .filter_map(|c| match c {
                Component::Arc { arc, .. } => Some(arc),
                _ => None,
            })
            .collect();
        for (i, a) in arcs.iter().enumerate() {
            for b in &arcs[i + 1..] {
                if a.overlap_length(b) > 0.0 {
                    return Err(Error::InvalidProblem(format!("arcs {a} and {b} overlap")));
                }
            }
        }
        for c in &components {
            if let Component::Atom { location, .. } = c {
                if let Some(a) = arcs.iter().find(|a| a.contains(*location)) {
                    return Err(Error::InvalidProblem(format!(
                        "atom at {location} lies inside arc {a}"
                    )));
                }
            }
        }
        let cumulative = components
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.mass();
                Some(*acc)
            })
            .collect();
        Ok(LearningProblem {
            name: None,
            components,
            cumulative,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Uniform marginal with constant regression value.
    pub fn uniform(eta: f64) -> Result<Self> {
        LearningProblem::new(vec![Component::arc(0.0, 0.0, 1.0, eta)?])
    }

    /// Two arcs `[0, 1/2)` and `[1/2, 1)` of equal mass.
    pub fn halves(eta_first: f64, eta_second: f64) -> Result<Self> {
        LearningProblem::new(vec![
            Component::arc(0.0, 0.5, 0.5, eta_first)?,
            Component::arc(0.5, 0.0, 0.5, eta_second)?,
        ])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidProblem(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serialises")
    }

    /// `mu(arc)`, honouring the half-open convention for atoms.
    pub fn measure(&self, arc: &HalfOpenArc) -> f64 {
        self.components.iter().map(|c| c.mass_in(arc)).sum()
    }

    /// `integral of eta over arc` with respect to `mu`.
    pub fn eta_integral(&self, arc: &HalfOpenArc) -> f64 {
        self.components.iter().map(|c| c.eta() * c.mass_in(arc)).sum()
    }

    /// `P[Y = 1 | X in arc]`.
    pub fn conditional_eta(&self, arc: &HalfOpenArc) -> Result<f64> {
        let m = self.measure(arc);
        if m <= 0.0 {
            return Err(Error::ZeroMeasure);
        }
        Ok(self.eta_integral(arc) / m)
    }

    /// `E[eta] = P[Y = 1]`.
    pub fn mean_eta(&self) -> f64 {
        self.components.iter().map(|c| c.mass() * c.eta()).sum()
    }

    pub fn bayes_error(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.mass() * c.eta().min(1.0 - c.eta()))
            .sum()
    }

    /// Exact misclassification probability of an arc-piecewise hypothesis.
    pub fn risk(&self, hypothesis: &Hypothesis) -> f64 {
        hypothesis
            .partition
            .arcs()
            .iter()
            .zip(&hypothesis.labels)
            .map(|(arc, &label)| {
                let ones = self.eta_integral(arc);
                if label == 1 {
                    self.measure(arc) - ones
                } else {
                    ones
                }
            })
            .sum()
    }

    /// The partition generated by every component boundary and atom, labelled
    /// by the majority regression value of each cell. This is a Bayes
    /// classifier whenever each cell carries a single regression value.
    pub fn bayes_hypothesis(&self) -> Hypothesis {
        let mut cuts = Vec::new();
        for c in &self.components {
            match c {
                Component::Atom { location, .. } => cuts.push(*location),
                Component::Arc { arc, .. } => {
                    cuts.push(arc.start);
                    cuts.push(arc.end);
                }
            }
        }
        let partition = ArcPartition::from_points(cuts);
        let labels = partition
            .arcs()
            .iter()
            .map(|a| u8::from(self.eta_integral(a) > 0.5 * self.measure(a)))
            .collect();
        Hypothesis::new(partition, labels).expect("one label per arc")
    }

    fn pick_component(&self, u: f64) -> &Component {
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.components[i.min(self.components.len() - 1)]
    }

    /// One labelled draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (CyclicPoint, Label) {
        let c = self.pick_component(rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1]);
        let x = match c {
            Component::Atom { location, .. } => *location,
            Component::Arc { arc, .. } => {
                CyclicPoint::wrap(arc.start.position() + rng.random::<f64>() * arc.length())
            }
        };
        let y = u8::from(rng.random::<f64>() < c.eta());
        (x, y)
    }

    /// Appends `n` fresh draws to `sample`, continuing its index sequence.
    pub fn extend_sample<R: Rng + ?Sized>(&self, rng: &mut R, sample: &mut LabeledSample, n: usize) {
        for _ in 0..n {
            let (x, y) = self.draw(rng);
            sample.push(x, y);
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> LabeledSample {
        let mut s = LabeledSample::with_capacity(n);
        self.extend_sample(rng, &mut s, n);
        s
    }

    /// `n` i.i.d. draws, determined by `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> LabeledSample {
        self.sample_with(&mut ChaCha8Rng::seed_from_u64(seed), n)
    }
}

/// One entry of a [`LabeledSample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    /// Position in the original sample, starting at 1.
    pub index: usize,
    pub point: CyclicPoint,
    pub label: Label,
}

/// An ordered labelled sample. Slices keep the original indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    entries: Vec<Entry>,
}

impl LabeledSample {
    pub fn with_capacity(n: usize) -> Self {
        LabeledSample {
            entries: Vec::with_capacity(n),
        }
    }

    /// Builds a sample indexed `1..=n` from points and labels.
    pub fn from_pairs<I: IntoIterator<Item = (CyclicPoint, Label)>>(pairs: I) -> Self {
        let mut s = LabeledSample::default();
        for (x, y) in pairs {
            s.push(x, y);
        }
        s
    }

    /// A sample from explicit entries, which must have strictly increasing
    /// indices and labels in `{0, 1}`.
    pub fn from_entries(entries: Vec<Entry>) -> Result<Self> {
        if entries.iter().any(|e| e.label > 1 || e.index == 0) {
            return Err(Error::InvalidArgument("labels must be 0 or 1 and indices positive".into()));
        }
        if entries.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(Error::InvalidArgument("entry indices must increase".into()));
        }
        Ok(LabeledSample { entries })
    }

    /// Largest index present, or 0 when empty.
    pub fn last_index(&self) -> usize {
        self.entries.last().map_or(0, |e| e.index)
    }

    pub fn push(&mut self, point: CyclicPoint, label: Label) {
        debug_assert!(label <= 1);
        let index = self.entries.last().map_or(1, |e| e.index + 1);
        self.entries.push(Entry { index, point, label });
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry with original index `index`, for samples indexed from 1
    /// contiguously.
    pub fn get(&self, index: usize) -> Option<&Entry> {
        let first = self.entries.first()?.index;
        self.entries.get(index.checked_sub(first)?)
    }

    /// Entries whose original index lies in `lo..=hi`.
    pub fn block(&self, lo: usize, hi: usize) -> &[Entry] {
        let a = self.entries.partition_point(|e| e.index < lo);
        let b = self.entries.partition_point(|e| e.index <= hi);
        &self.entries[a..b.max(a)]
    }

    pub fn prefix(&self, n: usize) -> &[Entry] {
        &self.entries[..n.min(self.entries.len())]
    }

    pub fn slice(&self, lo: usize, hi: usize) -> LabeledSample {
        LabeledSample {
            entries: self.block(lo, hi).to_vec(),
        }
    }
}

/// A classifier constant on each arc of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub partition: ArcPartition,
    pub labels: Vec<Label>,
}

impl Hypothesis {
    pub fn new(partition: ArcPartition, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != partition.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} arcs",
                labels.len(),
                partition.len()
            )));
        }
        Ok(Hypothesis { partition, labels })
    }

    pub fn constant(label: Label) -> Self {
        Hypothesis {
            partition: ArcPartition::trivial(),
            labels: vec![label],
        }
    }

    pub fn predict(&self, x: CyclicPoint) -> Label {
        self.labels[self.partition.locate(x)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn arc(s: f64, e: f64) -> HalfOpenArc {
        HalfOpenArc::from_positions(s, e).unwrap()
    }

    fn two_atoms() -> LearningProblem {
        LearningProblem::new(vec![
            Component::atom(0.25, 0.5, 0.2).unwrap(),
            Component::atom(0.75, 0.5, 0.7).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(LearningProblem::new(vec![]).is_err());
        assert!(LearningProblem::new(vec![Component::arc(0.0, 0.5, 0.9, 0.1).unwrap()]).is_err());
        assert!(LearningProblem::new(vec![
            Component::arc(0.0, 0.6, 0.5, 0.1).unwrap(),
            Component::arc(0.5, 0.0, 0.5, 0.1).unwrap(),
        ])
        .is_err());
        assert!(LearningProblem::new(vec![
            Component::arc(0.0, 0.6, 0.5, 0.1).unwrap(),
            Component::atom(0.3, 0.5, 0.1).unwrap(),
        ])
        .is_err());
        // an atom at the excluded end of an arc is fine
        assert!(LearningProblem::new(vec![
            Component::arc(0.0, 0.6, 0.5, 0.1).unwrap(),
            Component::atom(0.6, 0.5, 0.1).unwrap(),
        ])
        .is_ok());
        assert!(LearningProblem::new(vec![Component::arc(0.0, 0.0, 1.0, 1.5).unwrap()]).is_err());
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"components": [
            {"type": "atom", "mass": 0.25, "eta": 0.9, "location": 0.75},
            {"type": "arc", "mass": 0.75, "eta": 0.1, "start": 0.0, "end": 0.5}
        ]}"#;
        let p = LearningProblem::from_json(text).unwrap();
        assert_eq!(p.components().len(), 2);
        let again = LearningProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(p, again);
        assert!(LearningProblem::from_json(r#"{"components": [{"type": "atom", "mass": 1.0, "eta": 0.5, "location": 1.5}]}"#).is_err());
    }

    #[test]
    fn measure_examples() {
        let u = LearningProblem::uniform(0.3).unwrap();
        assert_eq!(u.measure(&HalfOpenArc::full_circle()), 1.0);
        assert_abs_diff_eq!(u.measure(&arc(0.2, 0.7)), 0.5, epsilon = 1e-15);
        let a = two_atoms();
        assert_eq!(a.measure(&arc(0.25, 0.75)), 0.5);
        assert_eq!(a.measure(&arc(0.75, 0.25)), 0.5);
        assert_eq!(a.measure(&arc(0.3, 0.75)), 0.0);
    }

    #[test]
    fn conditional_examples() {
        let u = LearningProblem::uniform(0.3).unwrap();
        assert_abs_diff_eq!(u.conditional_eta(&arc(0.1, 0.15)).unwrap(), 0.3, epsilon = 1e-12);
        let h = LearningProblem::halves(0.1, 0.9).unwrap();
        assert_abs_diff_eq!(
            h.conditional_eta(&HalfOpenArc::full_circle()).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(h.conditional_eta(&arc(0.6, 0.7)).unwrap(), 0.9, epsilon = 1e-12);
        assert_eq!(two_atoms().conditional_eta(&arc(0.3, 0.7)), Err(Error::ZeroMeasure));
    }

    #[test]
    fn bayes_examples() {
        assert_eq!(LearningProblem::uniform(0.0).unwrap().bayes_error(), 0.0);
        assert_eq!(LearningProblem::uniform(0.5).unwrap().bayes_error(), 0.5);
        assert_abs_diff_eq!(LearningProblem::halves(0.1, 0.9).unwrap().bayes_error(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn risk_examples() {
        let u = LearningProblem::uniform(0.3).unwrap();
        assert_abs_diff_eq!(u.risk(&Hypothesis::constant(0)), 0.3, epsilon = 1e-15);
        let h = LearningProblem::halves(0.1, 0.9).unwrap();
        let split = Hypothesis::new(
            ArcPartition::from_points(vec![CyclicPoint::new(0.0).unwrap(), CyclicPoint::new(0.5).unwrap()]),
            vec![0, 1],
        )
        .unwrap();
        assert_abs_diff_eq!(h.risk(&split), 0.1, epsilon = 1e-15);
        for p in [h, u, two_atoms()] {
            assert_abs_diff_eq!(p.risk(&p.bayes_hypothesis()), p.bayes_error(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sampling_examples() {
        let ones = LearningProblem::halves(1.0, 1.0).unwrap().sample(7, 500);
        assert!(ones.entries().iter().all(|e| e.label == 1));
        let atom = LearningProblem::new(vec![Component::atom(0.5, 1.0, 0.3).unwrap()]).unwrap();
        assert!(atom.sample(1, 200).entries().iter().all(|e| e.point.position() == 0.5));
        let s = atom.sample(3, 10);
        assert_eq!(s.entries().iter().map(|e| e.index).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        assert_eq!(atom.sample(3, 10), s);
    }

    #[test]
    fn uniform_sample_arc_masses() {
        let u = LearningProblem::uniform(0.5).unwrap();
        let n = 100_000;
        let s = u.sample(11, n);
        let part = ArcPartition::from_points([0.0, 0.1, 0.35, 0.8].map(|t| CyclicPoint::new(t).unwrap()));
        let counts = part.occupancy(s.entries().iter().map(|e| e.point));
        for (arc, c) in part.arcs().iter().zip(counts) {
            let m = arc.length();
            let se = (m * (1.0 - m) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - m).abs() < 3.0 * se, "{arc}: {c}");
        }
    }

    #[test]
    fn sample_blocks_keep_indices() {
        let s = LearningProblem::uniform(0.5).unwrap().sample(5, 20);
        let b = s.slice(4, 9);
        assert_eq!(b.len(), 6);
        assert_eq!(b.entries()[0].index, 4);
        assert_eq!(s.block(10, 9).len(), 0);
        assert_eq!(s.get(7).unwrap().index, 7);
    }
}
