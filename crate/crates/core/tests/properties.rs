//! Properties of the circle, learning problems and schedules.

use proptest::prelude::*;
use rand::Rng;
use smart_rule::error_function::find_n;
use smart_rule::harness::trial_rng;
use smart_rule::schedule::default_sequences;
use smart_rule::{
    cyclic_between, exact_schedule, successor, transport_from_uniform, vc_sample_size, ArcPartition, Component,
    CyclicPoint, FindNOptions, HalfOpenArc, Hypothesis, LearningProblem,
};

fn pt(t: f64) -> CyclicPoint {
    CyclicPoint::new(t).unwrap()
}

fn test_problems() -> Vec<LearningProblem> {
    vec![
        LearningProblem::uniform(0.3).unwrap(),
        LearningProblem::halves(0.1, 0.9).unwrap(),
        LearningProblem::new(vec![
            Component::atom(0.25, 0.5, 0.2).unwrap(),
            Component::atom(0.75, 0.5, 0.7).unwrap(),
        ])
        .unwrap(),
        LearningProblem::new(vec![
            Component::atom(0.15, 0.2, 0.95).unwrap(),
            Component::arc(0.7, 0.1, 0.5, 0.25).unwrap(),
            Component::arc(0.3, 0.6, 0.3, 0.6).unwrap(),
        ])
        .unwrap(),
    ]
}

#[test]
fn cyclic_order_axioms() {
    let mut rng = trial_rng(1, 0);
    let mut draw = || pt(rng.random::<f64>());
    let mut checked = 0;
    while checked < 10_000 {
        let (x, y, z, w) = (draw(), draw(), draw(), draw());
        if x == y || y == z || x == z || w == x || w == y || w == z {
            continue;
        }
        let xyz = cyclic_between(x, y, z).unwrap();
        // exactly one orientation
        assert_ne!(xyz, cyclic_between(z, y, x).unwrap());
        // rotation
        if xyz {
            assert!(cyclic_between(y, z, x).unwrap());
        }
        // transitivity
        if xyz && cyclic_between(x, z, w).unwrap() {
            assert!(cyclic_between(x, y, w).unwrap());
        }
        checked += 1;
    }
    assert!(cyclic_between(pt(0.1), pt(0.1), pt(0.3)).is_err());
}

#[test]
fn partitions_tile_the_circle() {
    let mut rng = trial_rng(2, 0);
    for size in 2..=50 {
        let points: Vec<CyclicPoint> = (0..size).map(|_| pt(rng.random())).collect();
        let partition = ArcPartition::from_points(points.iter().copied());
        let arcs = partition.arcs();
        assert_eq!(arcs.len(), partition.points().len());
        let total: f64 = arcs.iter().map(HalfOpenArc::length).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for a in &arcs {
            // arcs run from a point to its cyclic successor
            assert_eq!(a.end, successor(partition.points(), a.start).unwrap());
        }
        for _ in 0..1000 {
            let x = pt(rng.random());
            let hits: Vec<usize> = (0..arcs.len()).filter(|&i| arcs[i].contains(x)).collect();
            assert_eq!(hits, vec![partition.locate(x)]);
        }
    }
}

#[test]
fn transport_pushes_uniform_to_mu() {
    let draws = 100_000;
    let mut rng = trial_rng(3, 0);
    for problem in test_problems() {
        let cuts = ArcPartition::from_points((0..8).map(|j| pt(j as f64 / 8.0 + 0.01)));
        let mut counts = vec![0usize; cuts.len()];
        for _ in 0..draws {
            counts[cuts.locate(transport_from_uniform(&problem, rng.random()))] += 1;
        }
        for (c, arc) in counts.iter().zip(cuts.arcs()) {
            let m = problem.measure(&arc);
            let se = (m * (1.0 - m) / draws as f64).sqrt();
            let freq = *c as f64 / draws as f64;
            assert!((freq - m).abs() <= 3.0 * se + 1e-12, "{arc:?}: {freq} vs {m}");
        }
    }
}

#[test]
fn transport_is_monotone() {
    let mut rng = trial_rng(4, 0);
    for problem in test_problems() {
        for _ in 0..10_000 {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let (u, v) = if u <= v { (u, v) } else { (v, u) };
            let (a, b) = (transport_from_uniform(&problem, u), transport_from_uniform(&problem, v));
            assert!(a.position() <= b.position());
        }
    }
}

#[test]
fn risk_dominates_bayes_over_all_labelings() {
    let mut rng = trial_rng(5, 0);
    for problem in test_problems() {
        for size in 0..=10 {
            let partition = ArcPartition::from_points((0..size).map(|_| pt(rng.random())));
            let cells = partition.len();
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << cells) {
                let labels = (0..cells).map(|c| ((mask >> c) & 1) as u8).collect();
                let r = problem.risk(&Hypothesis::new(partition.clone(), labels).unwrap());
                assert!(r >= problem.bayes_error() - 1e-12);
                best = best.min(r);
            }
            // the best labeling of the partition is at least as good as a constant
            assert!(best <= problem.risk(&Hypothesis::constant(0)) + 1e-12);
        }
        let bayes = problem.bayes_hypothesis();
        assert!((problem.risk(&bayes) - problem.bayes_error()).abs() < 1e-12);
    }
}

#[test]
fn risk_matches_monte_carlo() {
    let draws = 1_000_000;
    for (i, problem) in test_problems().into_iter().enumerate() {
        let h = Hypothesis::new(
            ArcPartition::from_points([pt(0.2), pt(0.55), pt(0.8)]),
            vec![1, 0, 1],
        )
        .unwrap();
        let exact = problem.risk(&h);
        let mut rng = trial_rng(6, i as u64);
        let wrong = (0..draws)
            .filter(|_| {
                let (x, y) = problem.draw(&mut rng);
                h.predict(x) != y
            })
            .count();
        let est = wrong as f64 / draws as f64;
        let se = (exact * (1.0 - exact) / draws as f64).sqrt();
        assert!((est - exact).abs() <= 4.0 * se, "problem {i}: {est} vs {exact}");
    }
}

#[test]
fn conditional_eta_mixes_to_mean() {
    let mut rng = trial_rng(7, 0);
    for problem in test_problems() {
        let partition = ArcPartition::from_points((0..7).map(|_| pt(rng.random())));
        let total: f64 = partition
            .arcs()
            .iter()
            .filter(|a| problem.measure(a) > 0.0)
            .map(|a| problem.measure(a) * problem.conditional_eta(a).unwrap())
            .sum();
        assert!((total - problem.mean_eta()).abs() < 1e-12);
    }
}

#[test]
fn exact_two_stage_schedule_recomputes() {
    let (eps, delta) = default_sequences(2);
    let ex = exact_schedule(2, &eps, &delta, &FindNOptions::default()).unwrap();
    assert!(ex.failure.is_none());
    let s = ex.schedule.stage(2).unwrap();
    let big_n = find_n(1, eps[1], &FindNOptions::default()).unwrap().big_n;
    let a = vc_sample_size(2, big_n, delta[1]).unwrap();
    let b = vc_sample_size(2, a, delta[1]).unwrap();
    assert_eq!((s.test_min, s.a, s.b, s.n), (Some(big_n), a, b, 1 + a + b + 1));
    let (blk_a, blk_b) = ex.schedule.blocks(2).unwrap();
    assert_eq!((*blk_a.start(), *blk_a.end()), (3, a + 2));
    assert_eq!((*blk_b.start(), *blk_b.end()), (a + 3, s.n));
}

#[test]
fn vc_sample_size_from_its_three_terms() {
    // eps = 0.1 / 4; ln(16 e / eps) split as ln 16 + 1 - ln eps
    let eps: f64 = 0.025;
    let first = 48.0 / eps * (16f64.ln() + 1.0 - eps.ln());
    let second = 8.0 / eps * 40f64.ln();
    let third = 2.0 * 101.0 / eps;
    let m = first.max(second).max(third);
    assert!(m > 14326.0 && m < 14326.05, "{m}");
    assert_eq!(vc_sample_size(2, 101, 0.1).unwrap(), 14327);
}

proptest! {
    #[test]
    fn nn1_hypothesis_matches_predict(
        data in prop::collection::vec((0.0..1.0f64, 0u8..2), 1..30),
        queries in prop::collection::vec(0.0..1.0f64, 50),
    ) {
        let sample = smart_rule::LabeledSample::from_pairs(data.iter().map(|&(x, y)| (pt(x), y)));
        let h = smart_rule::rules::nn1_hypothesis(sample.entries()).unwrap();
        for q in queries {
            prop_assert_eq!(h.predict(pt(q)), smart_rule::nn1_predict(sample.entries(), pt(q)).unwrap());
        }
    }

    #[test]
    fn sampling_is_seed_deterministic(seed in any::<u64>(), n in 1usize..200) {
        let problem = &test_problems()[3];
        prop_assert_eq!(problem.sample(seed, n), problem.sample(seed, n));
    }
}
