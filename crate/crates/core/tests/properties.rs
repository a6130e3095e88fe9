//! Randomized invariants across modules.

use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treemilo::cart::{fit_cart, CartConfig};
use treemilo::dataset::{binarize, split, BinarizeOptions, BinaryDataset, SplitSpec};
use treemilo::formulations::{BuildOptions, Formulation, FormulationKind};
use treemilo::oracle::enumerate_optimal;
use treemilo::pareto::nondominated;
use treemilo::separation::{separate_fractional, separate_integral, CutKind, StrategyKind, DEFAULT_EPSILON};
use treemilo::tree::{Role, TrainedTree};
use treemilo::TreeTopology;

fn dataset_from_seed(seed: u64, max_rows: usize, max_features: usize, max_classes: usize) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |n: usize| (rng.next_u64() % n as u64) as usize;
    let k = 1 + pick(max_classes);
    let f = 1 + pick(max_features);
    let n = (k + pick(max_rows)).min(max_rows.max(k));
    let rows = (0..n).map(|_| (0..f).map(|_| pick(2) as u8).collect()).collect();
    let mut labels: Vec<usize> = (0..n).map(|_| pick(k)).collect();
    for (c, l) in labels.iter_mut().enumerate().take(k) {
        *l = c;
    }
    BinaryDataset::from_rows(rows, labels, k).unwrap()
}

fn tree_from_seed(seed: u64, h: u32, n_features: usize, n_classes: usize) -> TrainedTree {
    let topo = TreeTopology::new(h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roles = vec![Role::Pruned; topo.n_vertices()];
    let mut stack = vec![1usize];
    while let Some(v) = stack.pop() {
        if topo.is_branch(v) && rng.next_u64() % 3 != 0 {
            roles[v - 1] = Role::Branch((rng.next_u64() % n_features as u64) as usize);
            stack.push(TreeTopology::left(v));
            stack.push(TreeTopology::right(v));
        } else {
            roles[v - 1] = Role::Classify((rng.next_u64() % n_classes as u64) as usize);
        }
    }
    TrainedTree::new(topo, n_features, roles).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn topology_relations(h in 1u32..12, seed in any::<u64>()) {
        let t = TreeTopology::new(h).unwrap();
        prop_assert_eq!(t.n_vertices(), (1usize << (h + 1)) - 1);
        prop_assert_eq!(t.n_branch() + t.n_leaves(), t.n_vertices());
        let v = 1 + (seed as usize % t.n_vertices());
        let path = t.path_vertices(v).unwrap();
        prop_assert_eq!(path.len(), TreeTopology::depth(v) as usize + 1);
        prop_assert_eq!(path[0], 1);
        prop_assert_eq!(*path.last().unwrap(), v);
        for w in path.windows(2) {
            prop_assert_eq!(TreeTopology::parent(w[1]), w[0]);
        }
        let below = t.child_set(v).unwrap();
        let levels_below = h - TreeTopology::depth(v);
        prop_assert_eq!(below.len(), (1usize << (levels_below + 1)) - 2);
        prop_assert!(below.iter().all(|&u| TreeTopology::is_ancestor(v, u) && u != v));
        if t.is_branch(v) {
            prop_assert_eq!(TreeTopology::parent(TreeTopology::left(v)), v);
            prop_assert_eq!(TreeTopology::parent(TreeTopology::right(v)), v);
        }
    }

    #[test]
    fn binarizing_binary_data_is_identity(seed in any::<u64>()) {
        let d = dataset_from_seed(seed, 12, 5, 3);
        let keep: Vec<usize> = (0..d.n_features())
            .filter(|&f| (0..d.n_rows()).any(|i| d.x(i, f) == 0) && (0..d.n_rows()).any(|i| d.x(i, f) == 1))
            .collect();
        prop_assume!(!keep.is_empty());
        let rows = (0..d.n_rows()).map(|i| keep.iter().map(|&f| d.x(i, f)).collect()).collect();
        let d = BinaryDataset::from_rows(rows, d.labels().to_vec(), d.n_classes()).unwrap();
        let once = binarize(&d.to_raw(), &BinarizeOptions::default()).unwrap().dataset;
        prop_assert_eq!(&once, &d);
        let twice = binarize(&once.to_raw(), &BinarizeOptions::default()).unwrap().dataset;
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn split_is_a_sorted_partition(n in 2usize..200, seed in any::<u64>(), rep in 0u64..8, frac in 0.05f64..0.95) {
        let rows = (0..n).map(|i| vec![(i % 2) as u8]).collect();
        let labels = vec![0; n];
        let d = BinaryDataset::from_rows(rows, labels, 1).unwrap();
        let spec = SplitSpec::new(seed, frac, rep);
        let target = spec.train_size(n);
        prop_assume!(target > 0 && target < n);
        let sp = split(&d, &spec).unwrap();
        prop_assert_eq!(sp.train_idx.len(), target);
        prop_assert_eq!(target, (frac * n as f64 - 1e-9).ceil() as usize);
        let mut all: Vec<usize> = sp.train_idx.iter().chain(&sp.test_idx).copied().collect();
        prop_assert!(sp.train_idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(sp.test_idx.windows(2).all(|w| w[0] < w[1]));
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let again = split(&d, &spec).unwrap();
        prop_assert_eq!(again.train_idx, sp.train_idx);
    }

    #[test]
    fn tree_json_round_trip(seed in any::<u64>(), h in 1u32..5, nf in 1usize..6, nk in 1usize..4) {
        let t = tree_from_seed(seed, h, nf, nk);
        let back = TrainedTree::from_json_str(&t.to_json_string()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn encoded_trees_are_feasible_everywhere(seed in any::<u64>(), h in 1u32..4) {
        let d = dataset_from_seed(seed, 8, 4, 3);
        let t = tree_from_seed(seed ^ 0x5eed, h, d.n_features(), d.n_classes());
        let topo = TreeTopology::new(h).unwrap();
        let correct = t.correct_count(&d).unwrap() as f64;
        for kind in FormulationKind::ALL {
            let f = Formulation::build(kind, topo, &d, &BuildOptions::default()).unwrap();
            let x = f.encode_tree(&t);
            prop_assert_eq!(f.model.check(&x, 1e-9, false), Ok(()), "{}", kind);
            prop_assert_eq!(f.model.objective_value(&x), correct);
            let decoded = TrainedTree::decode(&x, &f.index).unwrap();
            for i in 0..d.n_rows() {
                prop_assert_eq!(decoded.predict(d.row(i)).unwrap(), t.predict(d.row(i)).unwrap());
            }
            if let Some(ck) = kind.cut_kind() {
                prop_assert!(separate_integral(&x, ck, &f.index, DEFAULT_EPSILON).is_empty());
            }
        }
    }

    #[test]
    fn fractional_rules_nest(seed in any::<u64>(), h in 1u32..4) {
        let d = dataset_from_seed(seed, 6, 3, 2);
        let topo = TreeTopology::new(h).unwrap();
        let f = Formulation::cut1(topo, &d, treemilo::CutStrategy::lazy()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..f.model.n_vars()).map(|_| (rng.next_u64() % 5) as f64 / 4.0).collect();
        for kind in [CutKind::Cut1, CutKind::Cut2] {
            let key = |c: &treemilo::separation::ViolatedCut| (c.datapoint, c.terminal, c.separator);
            let all: Vec<_> = separate_fractional(&x, kind, &f.index, StrategyKind::Frac1, DEFAULT_EPSILON).iter().map(key).collect();
            let first: Vec<_> = separate_fractional(&x, kind, &f.index, StrategyKind::Frac2, DEFAULT_EPSILON).iter().map(key).collect();
            let most: Vec<_> = separate_fractional(&x, kind, &f.index, StrategyKind::Frac3, DEFAULT_EPSILON).iter().map(key).collect();
            prop_assert!(first.iter().all(|c| all.contains(c)));
            prop_assert!(most.iter().all(|c| all.contains(c)));
            let mut pairs: Vec<_> = all.iter().map(|c| (c.0, c.1)).collect();
            pairs.dedup();
            prop_assert_eq!(first.len(), pairs.len());
            prop_assert_eq!(most.len(), pairs.len());
            prop_assert_eq!(all, separate_integral(&x, kind, &f.index, DEFAULT_EPSILON).iter().map(key).collect::<Vec<_>>());
        }
    }

    #[test]
    fn cart_is_valid_and_never_beats_enumeration(seed in any::<u64>(), h in 1u32..3, restricted in any::<bool>()) {
        let d = dataset_from_seed(seed, 10, 4, 3);
        let t = fit_cart(&d, &CartConfig::new(h, restricted)).unwrap();
        prop_assert_eq!(t.validate(), Ok(()));
        if restricted {
            let mut used: Vec<usize> = t.topology().vertices().filter_map(|v| t.branch_feature(v)).collect();
            let n = used.len();
            used.sort_unstable();
            used.dedup();
            prop_assert_eq!(used.len(), n);
        }
        let best = enumerate_optimal(&d, h, None).unwrap().best_correct;
        prop_assert!(t.correct_count(&d).unwrap() <= best);
    }

    #[test]
    fn oracle_is_monotone(seed in any::<u64>()) {
        let d = dataset_from_seed(seed, 10, 4, 3);
        let mut last = 0;
        for b in 0..=3 {
            let r = enumerate_optimal(&d, 2, Some(b)).unwrap();
            prop_assert!(r.best_correct >= last);
            prop_assert!(r.witness.n_branching() <= b);
            prop_assert_eq!(r.witness.correct_count(&d).unwrap(), r.best_correct);
            last = r.best_correct;
        }
        prop_assert_eq!(last, enumerate_optimal(&d, 2, None).unwrap().best_correct);
        prop_assert!(enumerate_optimal(&d, 1, None).unwrap().best_correct <= last);
        prop_assert_eq!(enumerate_optimal(&d, 2, Some(0)).unwrap().best_correct, d.majority_count());
    }

    #[test]
    fn nondominated_matches_a_sweep(accs in prop::collection::vec(0u32..6, 1..12)) {
        // Distinct k values: the frontier is every strict running maximum.
        let pts: Vec<(usize, f64)> = accs.iter().enumerate().map(|(k, &a)| (k, a as f64 / 5.0)).collect();
        let mut best = f64::NEG_INFINITY;
        let expected: Vec<bool> = pts.iter().map(|&(_, a)| { let nd = a > best; best = best.max(a); nd }).collect();
        prop_assert_eq!(nondominated(&pts), expected);
    }
}
