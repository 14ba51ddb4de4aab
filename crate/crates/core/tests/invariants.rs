use proptest::prelude::*;
use split_forge::dataset::{load_embeddings, ConceptSet, EmbeddingFormat, SupercategoryMap, TensorDtype};
use split_forge::embedding_ops::{cosine_similarity, kmeans, top_pairs};
use split_forge::grouping::{group_similarity, Group, Grouping, Hint, Strategy as GroupStrategy};
use split_forge::metrics::{f1_score, pearson, supercategory_dominance};
use split_forge::probe::{predict, train_probe, ProbeConfig};
use split_forge::splitter::{assign_split, verify_split, Side, SplitConstraints};

fn concept_set(n: usize, d: usize, values: Vec<f64>) -> ConceptSet {
    let names = (0..n).map(|i| format!("c{i}")).collect();
    ConceptSet::from_flat(names, values, d).unwrap()
}

fn arb_concepts() -> impl Strategy<Value = ConceptSet> {
    (2usize..30, 1usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop_oneof![-5.0..-0.1f64, 0.1..5.0f64], n * d).prop_map(move |v| concept_set(n, d, v))
    })
}

/// Groups from a random label per concept, with random hints.
fn arb_grouped_labels() -> impl Strategy<Value = (Grouping, Vec<u8>)> {
    (4usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..8, n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..6, 8),
        )
            .prop_map(move |(gid, mut labels, hints)| {
                labels[0] = 1;
                labels[1] = 0;
                let groups = (0..8)
                    .map(|g| Group {
                        members: (0..n).filter(|&i| gid[i] == g).collect(),
                        hint: match hints[g] {
                            0 => Hint::ForceTrain,
                            1 => Hint::PreferTrain,
                            _ => Hint::Free,
                        },
                    })
                    .filter(|g| !g.members.is_empty())
                    .collect();
                (Grouping::new(GroupStrategy::Llm, n, groups).unwrap(), labels)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cosine_bounded_and_symmetric(u in prop::collection::vec(0.1..3.0f64, 4), v in prop::collection::vec(-3.0..-0.1f64, 4)) {
        let a = cosine_similarity(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&a));
        prop_assert_eq!(a, cosine_similarity(&v, &u).unwrap());
        let scaled: Vec<f64> = u.iter().map(|x| x * 7.5).collect();
        prop_assert!((cosine_similarity(&scaled, &v).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn top_pairs_sorted_and_unique(cs in arb_concepts(), k in 1usize..50) {
        let pairs = top_pairs(&cs, k).unwrap();
        let n = cs.len();
        prop_assert_eq!(pairs.len(), k.min(n * (n - 1) / 2));
        for w in pairs.windows(2) {
            prop_assert!(w[0].sim > w[1].sim || (w[0].sim == w[1].sim && (w[0].i, w[0].j) < (w[1].i, w[1].j)));
        }
        prop_assert!(pairs.iter().all(|p| p.i < p.j));
    }

    #[test]
    fn similarity_grouping_is_partition(cs in arb_concepts(), k in 1usize..20) {
        let g = group_similarity(&cs, k).unwrap();
        let mut seen = vec![0usize; cs.len()];
        for grp in &g.groups {
            for &m in &grp.members {
                seen[m] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let grouped = g.groups.iter().filter(|grp| grp.members.len() >= 2).map(|grp| grp.members.len()).sum::<usize>();
        prop_assert!((g.coverage - grouped as f64 / cs.len() as f64).abs() < 1e-12);
        prop_assert_eq!(g.size_histogram().iter().map(|(s, c)| s * c).sum::<usize>(), cs.len());
    }

    #[test]
    fn kmeans_converged_points_sit_with_nearest_centroid(cs in arb_concepts(), k in 1usize..6, seed in 0u64..1000) {
        let k = k.min(cs.len());
        let ca = kmeans(&cs, k, seed, 300).unwrap();
        prop_assert_eq!(ca.cluster_sizes().iter().sum::<usize>(), cs.len());
        prop_assert!(ca.cluster_sizes().iter().all(|&s| s > 0));
        prop_assert!(ca.inertia_history.windows(2).all(|w| w[1] <= w[0]));
        if ca.converged {
            for (i, row) in cs.rows().enumerate() {
                let d = |c: &[f64]| row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                let own = d(&ca.centroids[ca.assignment[i]]);
                prop_assert!(ca.centroids.iter().all(|c| own <= d(c) + 1e-9));
            }
        }
        prop_assert_eq!(&ca, &kmeans(&cs, k, seed, 300).unwrap());
    }

    #[test]
    fn split_respects_groups((g, labels) in arb_grouped_labels(), seed in any::<u64>()) {
        let c = SplitConstraints::default();
        let sa = assign_split(&g, &labels, &c, seed).unwrap();
        for grp in &g.groups {
            let first = sa.side[grp.members[0]];
            prop_assert!(grp.members.iter().all(|&m| sa.side[m] == first));
            if grp.hint == Hint::ForceTrain {
                prop_assert_eq!(first, Side::Train);
            }
        }
        let report = verify_split(&sa, &g, &labels, &c);
        prop_assert!(report.check("recorded statistics").unwrap().passed);
        prop_assert!(report.check("feasible flag").unwrap().passed);
        if sa.feasible {
            prop_assert!(report.all_passed(), "{:?}", report.failures());
        }
        prop_assert_eq!(&sa, &assign_split(&g, &labels, &c, seed).unwrap());
    }

    #[test]
    fn f1_bounded(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..80)) {
        let (y, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let f = f1_score(&y, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f1_score(&y, &y).unwrap(), if y.contains(&1) { 1.0 } else { 0.0 });
    }

    #[test]
    fn pearson_bounded_and_affine_invariant(xy in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..50), a in 0.5..4.0f64, b in -3.0..3.0f64) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&x2, &y).unwrap() - r).abs() < 1e-9);
        }
    }

    #[test]
    fn dominance_bounds(assign in prop::collection::vec(0usize..5, 5..40), mask in prop::collection::vec(any::<bool>(), 40)) {
        let mut assign = assign;
        assign[..5].copy_from_slice(&[0, 1, 2, 3, 4]);
        let sm = SupercategoryMap::new(assign.clone(), (0..5).map(|s| format!("s{s}")).collect()).unwrap();
        let positives: Vec<usize> = (0..assign.len()).filter(|&i| mask[i]).collect();
        prop_assume!(!positives.is_empty());
        let d = supercategory_dominance(&positives, &sm).unwrap();
        prop_assert!((1.0 / 5.0 - 1e-12..=1.0).contains(&d));
    }

    #[test]
    fn binary_tensor_roundtrip(cs in arb_concepts()) {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("e.bin");
        cs.write_binary(&path, TensorDtype::F64).unwrap();
        prop_assert_eq!(&load_embeddings(&path, EmbeddingFormat::BinaryTensor).unwrap(), &cs);
        let csv = dir.path().join("e.csv");
        cs.write_csv(&csv).unwrap();
        prop_assert_eq!(&load_embeddings(&csv, EmbeddingFormat::Csv).unwrap(), &cs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn probe_loss_never_increases(x in prop::collection::vec(-3.0..3.0f64, 60), flips in prop::collection::vec(any::<bool>(), 20), standardize in any::<bool>()) {
        let d = 3;
        let mut y: Vec<u8> = x.chunks(d).zip(&flips).map(|(r, &f)| ((r[0] + 0.5 * r[1] > 0.0) ^ f) as u8).collect();
        y[0] = 1;
        y[1] = 0;
        let cfg = ProbeConfig { standardize, ..ProbeConfig::default() };
        let m = train_probe(&x, d, &y, &cfg).unwrap();
        prop_assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(predict(&m, &x).unwrap().len(), y.len());
    }
}
