use std::sync::Arc;

use proptest::prelude::*;
use swalloc_core::function::{CoverageFunction, CutFunction, SetFunction, TableFunction, EPS};
use swalloc_core::hardness::{allocator_by_name, run_hardness};
use swalloc_core::matroid::{Matroid, PartitionPadding};
use swalloc_core::online::{exact_adversarial, exact_lemma_k_vs_p, run_adversarial};
use swalloc_core::rrg::{
    closed_form_bounds, default_t, exact_free_part_distribution, exact_greedy_orders,
    exact_original_rrg, exact_smooth_partition, expected_value, smooth_rrg_partition,
};
use swalloc_core::verify::{
    best_extension, brute_force_opt_matroid, brute_force_opt_welfare, check_sampling_lemma,
};
use swalloc_core::{trial_rng, Allocation, ItemSet, Oracle, PartitionStructure, WelfareInstance};

#[derive(Debug, Clone)]
enum Util {
    Coverage(CoverageFunction),
    Cut(CutFunction),
}

impl Util {
    fn arc(&self) -> Arc<dyn SetFunction> {
        match self {
            Util::Coverage(f) => Arc::new(f.clone()),
            Util::Cut(f) => Arc::new(f.clone()),
        }
    }

    fn oracle(&self) -> Oracle {
        Oracle::from_arc(self.arc())
    }
}

#[derive(Debug, Clone)]
struct Inst {
    items: usize,
    utils: Vec<Util>,
}

impl Inst {
    fn build(&self) -> WelfareInstance {
        WelfareInstance::new(self.items, self.utils.iter().map(Util::arc).collect()).unwrap()
    }
}

fn coverage(items: usize) -> impl Strategy<Value = Util> {
    let universe = items + 1;
    (
        prop::collection::vec(1u8..5, universe),
        prop::collection::vec(prop::collection::vec(any::<bool>(), universe), items),
    )
        .prop_map(|(w, covers)| {
            let covers = covers
                .into_iter()
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .filter(|(_, b)| **b)
                        .map(|(i, _)| i)
                        .collect()
                })
                .collect();
            Util::Coverage(
                CoverageFunction::new(w.into_iter().map(f64::from).collect(), covers).unwrap(),
            )
        })
}

fn cut(items: usize) -> impl Strategy<Value = Util> {
    let pairs: Vec<(usize, usize)> = (0..items)
        .flat_map(|a| (a + 1..items).map(move |b| (a, b)))
        .collect();
    prop::collection::vec(0u8..4, pairs.len()).prop_map(move |w| {
        let edges = pairs
            .iter()
            .zip(w)
            .filter(|(_, w)| *w > 0)
            .map(|(&(a, b), w)| (a, b, f64::from(w)))
            .collect();
        Util::Cut(CutFunction::new(items, edges).unwrap())
    })
}

fn utility(items: usize) -> BoxedStrategy<Util> {
    prop_oneof![coverage(items), cut(items)].boxed()
}

fn instance(max_items: usize, max_bidders: usize) -> impl Strategy<Value = Inst> {
    (1..=max_items, 1..=max_bidders).prop_flat_map(|(m, n)| {
        prop::collection::vec(utility(m), n).prop_map(move |utils| Inst { items: m, utils })
    })
}

fn with_order(max_items: usize, max_bidders: usize) -> impl Strategy<Value = (Inst, Vec<usize>)> {
    instance(max_items, max_bidders).prop_flat_map(|inst| {
        let order = Just((0..inst.items).collect::<Vec<_>>()).prop_shuffle();
        (Just(inst), order)
    })
}

fn partition(items: usize, k: usize) -> impl Strategy<Value = PartitionStructure> {
    prop::collection::vec(0..k, items - k).prop_map(move |extra| {
        let mut parts: Vec<Vec<usize>> = (0..k).map(|j| vec![j]).collect();
        for (i, j) in extra.into_iter().enumerate() {
            parts[j].push(k + i);
        }
        PartitionStructure::new(items, parts).unwrap()
    })
}

fn matroid_instance() -> impl Strategy<Value = (Util, PartitionStructure)> {
    (3usize..=4, 0usize..=2).prop_flat_map(|(k, extra)| {
        let items = k + extra;
        (utility(items), partition(items, k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn allocator_runs_are_feasible_and_guarded((inst, order) in with_order(6, 3), seed in any::<u64>()) {
        let inst = inst.build();
        inst.reset_queries();
        let run = run_adversarial(&inst, &order, &mut trial_rng(seed, 0), None).unwrap();
        prop_assert!(run.allocation.is_disjoint());
        prop_assert_eq!(inst.total_queries(), (inst.bidders() * (1 + inst.items())) as u64);
        prop_assert!((run.welfare - inst.welfare_unmetered(&run.allocation)).abs() <= EPS);
        let mut held = Allocation::empty(inst.bidders());
        for &item in &order {
            if let Some(j) = run.allocation.owner(item) {
                let f = inst.bidder(j);
                let gain = f.value_unmetered(&held.set(j).with(item)) - f.value_unmetered(held.set(j));
                prop_assert!(gain >= -EPS);
                held.assign(item, j);
            }
        }
    }

    #[test]
    fn exact_allocator_guarantees((inst, order) in with_order(4, 3)) {
        let inst = inst.build();
        let opt = brute_force_opt_welfare(&inst).unwrap();
        let out = exact_adversarial(&inst, &order, None).unwrap();
        prop_assert!(out.expected_welfare >= 0.25 * opt.value - EPS);
        for row in &out.inclusion {
            prop_assert!(row.iter().all(|&p| p <= 0.5 + EPS));
            prop_assert!(row.iter().sum::<f64>() <= 1.0 + EPS);
        }
        for r in exact_lemma_k_vs_p(&inst, &order, &opt.witness).unwrap() {
            prop_assert!(r.holds, "{:?}", r);
        }
    }

    #[test]
    fn smooth_rrg_trajectories((f, parts) in matroid_instance(), seed in any::<u64>(), t in 0usize..8) {
        let f = f.oracle();
        let run = smooth_rrg_partition(&f, &parts, t, &mut trial_rng(seed, 0)).unwrap();
        let values = run.values();
        prop_assert!(values.windows(2).all(|w| w[1] >= w[0] - EPS));
        prop_assert!(parts.is_independent(&run.real_set()));
        prop_assert!(run.set.len() <= parts.k());
    }

    #[test]
    fn smooth_rrg_exact_law((f, parts) in matroid_instance()) {
        let f = f.oracle();
        let k = parts.k();
        let t = default_t(k);
        let dist = exact_smooth_partition(&f, &parts, t).unwrap();
        prop_assert!((dist.values().sum::<f64>() - 1.0).abs() <= 1e-12);
        let mut by_size = vec![0.0; k + 1];
        for (s, p) in &dist {
            by_size[s.len()] += p;
        }
        let law = exact_free_part_distribution(k, t);
        for (a, b) in by_size.iter().zip(&law) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let opt = brute_force_opt_matroid(&f, &parts).unwrap();
        let pad = PartitionPadding::new(parts.clone());
        prop_assert!((best_extension(&f, &pad, &ItemSet::new()).unwrap().value - opt.value).abs() <= EPS);
        let bound = closed_form_bounds(k, t, opt.value).unwrap().solution;
        prop_assert!(expected_value(&f, &dist) >= bound - EPS);
    }

    #[test]
    fn original_rrg_is_random_order_greedy(inst in instance(4, 2)) {
        let inst = inst.build();
        let (f, parts) = inst.to_partition();
        let rrg = exact_original_rrg(&f, &PartitionPadding::new(parts)).unwrap();
        let mut mapped = std::collections::BTreeMap::new();
        for (s, p) in rrg {
            let a = Allocation::from_ground_set(&s.truncated(inst.items() * inst.bidders()), inst.items(), inst.bidders());
            *mapped.entry(a).or_insert(0.0) += p;
        }
        let greedy = exact_greedy_orders(&inst).unwrap();
        prop_assert_eq!(mapped.len(), greedy.len());
        for (a, p) in &greedy {
            prop_assert!((mapped[a] - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampling_lemma_on_product_laws(
        f in (1usize..=4).prop_flat_map(utility),
        offset in 0u8..4,
        p in prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]),
        raw in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let f = f.arc();
        let m = f.ground_size();
        let values = (0..1u64 << m).map(|mask| f.value(&ItemSet::from_mask(mask)) + f64::from(offset)).collect();
        let t = TableFunction::validated(m, values).unwrap();
        let probs: Vec<f64> = raw[..m].iter().map(|q| q * p).collect();
        prop_assert!(check_sampling_lemma(&t, &probs, p).unwrap().holds);
    }

    #[test]
    fn hardness_ratio_at_most_one_over_m(big in 1.0f64..1e4, name in prop::sample::select(vec!["greedy", "discard", "first"])) {
        let mut alg = allocator_by_name(name).unwrap();
        let out = run_hardness(alg.as_mut(), big).unwrap();
        prop_assert!(out.ratio <= 1.0 / big + EPS);
        prop_assert!(out.alg_value <= 1.0 + EPS);
    }
}
