use std::collections::BTreeSet;

use proptest::prelude::*;

use packshift::geometry::validate_packing;
use packshift::harness::{export, generate_trace, orient_rotation, run_trace, ExperimentConfig, Format, GeneratorSpec, Pattern};
use packshift::model::{Domain, EventOp, ItemKey, ItemSpec, SolutionState};
use packshift::offline::{bottom_left_search, exact_vector_opt, restart_repack, volume_lower_bound, RepackOrder};
use packshift::{OnlineAlgorithm, ProblemKind, Rational, RobustRunner, RunnerConfig, Trace};

fn side() -> impl Strategy<Value = Rational> {
    (1i64..=64).prop_map(|k| Rational::new(k, 64))
}

fn sides(d: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(side(), d)
}

fn items_for(alg: OnlineAlgorithm, max: usize) -> BoxedStrategy<Vec<ItemSpec>> {
    let d = alg.dim();
    let one = move |(i, s): (usize, Vec<Rational>)| -> ItemSpec {
        let id = format!("i{i}");
        match alg {
            OnlineAlgorithm::Shelf2d => ItemSpec::rect2d(id, s[0].clone(), s[1].clone()),
            OnlineAlgorithm::HypercubeStrip { .. } | OnlineAlgorithm::HypercubeSlots { .. } => {
                ItemSpec::hypercube(id, s[0].clone(), d)
            }
            OnlineAlgorithm::VectorFirstFit { .. } => ItemSpec::vector(id, s),
            _ => ItemSpec::hyperrect(id, s),
        }
    };
    prop::collection::vec(sides(d), 1..max)
        .prop_map(move |v| v.into_iter().enumerate().map(one).collect())
        .boxed()
}

fn any_algorithm() -> impl Strategy<Value = OnlineAlgorithm> {
    prop_oneof![
        Just(OnlineAlgorithm::Shelf2d),
        Just(OnlineAlgorithm::ProjectedStrip { d: 2 }),
        Just(OnlineAlgorithm::ProjectedStrip { d: 3 }),
        Just(OnlineAlgorithm::HypercubeStrip { d: 2 }),
        Just(OnlineAlgorithm::HypercubeStrip { d: 3 }),
        Just(OnlineAlgorithm::Slots { d: 1 }),
        Just(OnlineAlgorithm::Slots { d: 2 }),
        Just(OnlineAlgorithm::Slots { d: 3 }),
        Just(OnlineAlgorithm::HypercubeSlots { d: 2 }),
        Just(OnlineAlgorithm::HypercubeSlots { d: 3 }),
        Just(OnlineAlgorithm::VectorFirstFit { d: 1 }),
        Just(OnlineAlgorithm::VectorFirstFit { d: 3 }),
    ]
}

fn alg_and_items() -> impl Strategy<Value = (OnlineAlgorithm, Vec<ItemSpec>, usize)> {
    any_algorithm()
        .prop_flat_map(|alg| (Just(alg), items_for(alg, 60)))
        .prop_flat_map(|(alg, items)| {
            let n = items.len();
            (Just(alg), Just(items), 0..=n)
        })
}

fn pack(alg: OnlineAlgorithm, prev: &SolutionState, items: &[ItemSpec]) -> SolutionState {
    let mut run = alg.flexify(prev).unwrap();
    let mut sol = prev.clone();
    for item in items {
        let record = run.place(item).unwrap();
        sol.insert(ItemKey::new(item.id.as_str(), 0), item.clone(), record).unwrap();
    }
    sol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flexified_runs_never_move_earlier_items((alg, items, split) in alg_and_items()) {
        let prefix = pack(alg, &SolutionState::new(alg.domain()), &items[..split]);
        let full = pack(alg, &prefix, &items[split..]);
        for (key, placed) in prefix.iter() {
            prop_assert_eq!(&full.get(key).unwrap().record, &placed.record);
        }
        let one_run = pack(alg, &SolutionState::new(alg.domain()), &items);
        for (key, placed) in prefix.iter() {
            prop_assert_eq!(&one_run.get(key).unwrap().record, &placed.record);
        }
        prop_assert!(validate_packing(&full).is_valid());
        prop_assert!(validate_packing(&one_run).is_valid());
    }

    #[test]
    fn certified_growth_holds_after_every_item((alg, items, split) in alg_and_items()) {
        let prefix = pack(alg, &SolutionState::new(alg.domain()), &items[..split]);
        let mut run = alg.flexify(&prefix).unwrap();
        for item in &items[split..] {
            run.place(item).unwrap();
            prop_assert!(run.audit().is_empty(), "{:?}", run.audit());
            prop_assert_ne!(run.ratio_holds(), Some(false));
        }
    }

    #[test]
    fn rotation_keeps_size(w in side(), h in side(), s in sides(4)) {
        let rect = ItemSpec::rect2d("r", w, h);
        prop_assert_eq!(orient_rotation(&rect).size(), rect.size());
        let box4 = ItemSpec::hyperrect("b", s);
        let turned = orient_rotation(&box4);
        prop_assert_eq!(turned.size(), box4.size());
        let sorted = turned.sides().unwrap();
        prop_assert!(sorted.windows(2).all(|p| p[0] <= p[1]) || sorted.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn exact_vector_opt_is_monotone(vs in prop::collection::vec(sides(2), 0..8), mask in any::<u8>()) {
        let subset: Vec<_> = vs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v.clone()).collect();
        let full = exact_vector_opt(&vs).unwrap();
        prop_assert!(exact_vector_opt(&subset).unwrap() <= full);
        for k in 0..2 {
            let load: Rational = vs.iter().map(|v| v[k].clone()).sum();
            prop_assert!(Rational::from(full) >= load.ceil());
        }
        prop_assert!(full <= vs.len());
    }

    #[test]
    fn bottom_left_dominates_the_lower_bound(rects in prop::collection::vec((side(), side()), 0..6)) {
        let items: Vec<ItemSpec> = rects.iter().enumerate().map(|(i, (w, h))| ItemSpec::rect2d(format!("r{i}"), w.clone(), h.clone())).collect();
        let height = bottom_left_search(&rects).unwrap();
        let lower = volume_lower_bound(&items, Domain::Strip { d: 2 });
        prop_assert!(height >= lower);
        let stacked: Rational = rects.iter().map(|(_, h)| h.clone()).sum();
        prop_assert!(height <= stacked);
    }

    #[test]
    fn restart_respects_its_volume_certificate((alg, items, _) in alg_and_items(), order in 0..3usize) {
        let order = [RepackOrder::AsGiven, RepackOrder::VolumeDesc, RepackOrder::MajorSideDesc][order];
        let keyed: Vec<_> = items.iter().map(|i| (ItemKey::new(i.id.as_str(), 0), i.clone())).collect();
        let result = restart_repack(&keyed, &alg, order).unwrap();
        prop_assert_eq!(result.solution.len(), items.len());
        prop_assert!(validate_packing(&result.solution).is_valid());
        if let Some(cert) = result.volume_certificate {
            let vol: Rational = items.iter().map(ItemSpec::size).sum();
            prop_assert!(cert.holds(result.solution.cost(), &vol));
        }
    }

    #[test]
    fn churn_never_departs_a_dead_item(seed in any::<u64>(), p in 0.0f64..0.9, problem in 0..7usize) {
        let spec = GeneratorSpec::new(
            ProblemKind::ALL[problem],
            3,
            Pattern::Churn { n: 200, depart_prob: p, min_size: 0.01, max_size: 1.0 },
        );
        let trace = generate_trace(&spec, seed).unwrap();
        let mut live = BTreeSet::new();
        for e in &trace.events {
            match &e.op {
                EventOp::Insert(item) => prop_assert!(live.insert(item.id.clone())),
                EventOp::Depart(id) => prop_assert!(live.remove(id)),
            }
        }
        prop_assert_eq!(trace.to_jsonl(), generate_trace(&spec, seed).unwrap().to_jsonl());
    }

    #[test]
    fn migration_stays_within_the_churn_budget(
        seed in any::<u64>(),
        eps in prop_oneof![Just(Rational::new(1, 2)), Just(Rational::new(1, 5)), Just(Rational::new(1, 20))],
        problem in 0..7usize,
    ) {
        let problem = ProblemKind::ALL[problem];
        let spec = GeneratorSpec::new(problem, 2, Pattern::Churn { n: 80, depart_prob: 0.4, min_size: 0.05, max_size: 1.0 });
        let trace = generate_trace(&spec, seed).unwrap();
        let mut runner = RobustRunner::new(RunnerConfig::new(eps.clone(), problem.default_online(2), Default::default())).unwrap();
        let mut migrated = Rational::zero();
        let mut churn = Rational::zero();
        let mut sizes = std::collections::BTreeMap::new();
        for e in &trace.events {
            churn += &match &e.op {
                EventOp::Insert(item) => { sizes.insert(item.id.clone(), item.size()); item.size() }
                EventOp::Depart(id) => sizes.remove(id).unwrap(),
            };
            let row = runner.step(e).unwrap();
            migrated += &row.migrated;
            prop_assert!(migrated <= (eps.recip() + Rational::one()) * &churn);
            prop_assert!(row.violations.is_empty(), "{:?}", row.violations);
        }
        prop_assert!(runner.validate().is_valid());
    }

    #[test]
    fn reports_are_reproducible(seed in 0u64..1000) {
        let spec = GeneratorSpec::new(ProblemKind::Bin2d, 2, Pattern::Churn { n: 60, depart_prob: 0.3, min_size: 0.05, max_size: 1.0 });
        let trace = generate_trace(&spec, seed).unwrap();
        let config = ExperimentConfig::new(ProblemKind::Bin2d, 2, Rational::new(1, 10));
        let a = run_trace(&config, &trace).unwrap().report;
        let b = run_trace(&config, &trace).unwrap().report;
        let csv = export(&a, Format::Csv).unwrap();
        prop_assert_eq!(&csv, &export(&b, Format::Csv).unwrap());
        prop_assert_eq!(String::from_utf8(csv).unwrap().lines().count(), trace.len() + 1);
    }
}

#[test]
fn empty_trace_gives_empty_report() {
    let config = ExperimentConfig::new(ProblemKind::Strip2d, 2, Rational::new(1, 10));
    let report = run_trace(&config, &Trace::new(Vec::new())).unwrap().report;
    assert!(report.rows.is_empty());
    let csv = String::from_utf8(export(&report, Format::Csv).unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 1);
}
