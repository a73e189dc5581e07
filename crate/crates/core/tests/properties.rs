mod common;

use std::collections::HashSet;

use graphcm::autodiff::{Matrix, ParamStore, Tape, PROB_EPS};
use graphcm::baselines::{Baseline, BaselineKind, EmConfig};
use graphcm::eval::ndcg_at_k;
use graphcm::graph::*;
use graphcm::model::*;
use graphcm::session_log::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Page = (u8, Vec<(u8, bool)>);

fn pages() -> impl Strategy<Value = Vec<Vec<Page>>> {
    let page = (0u8..12, prop::collection::vec((0u8..20, any::<bool>()), 1..5));
    prop::collection::vec(prop::collection::vec(page, 1..4), 3..40)
}

fn ingest(log: &[Vec<Page>]) -> Vec<Session> {
    let mut corpus = Corpus::new();
    log.iter()
        .enumerate()
        .map(|(i, pages)| {
            let raw = RawSession {
                sid: format!("s{i}"),
                queries: pages
                    .iter()
                    .map(|(q, docs)| RawQuery {
                        qid: format!("q{q}"),
                        // distinct documents per page
                        docs: docs
                            .iter()
                            .enumerate()
                            .map(|(p, &(d, c))| RawDoc {
                                did: format!("d{d}_{p}"),
                                pos: p as u32 + 1,
                                vert: None,
                                click: c as u8,
                            })
                            .collect(),
                    })
                    .collect(),
            };
            corpus.ingest(&raw).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_and_partition_cover_the_log_exactly(log in pages(), seed in any::<u64>()) {
        let sessions = ingest(&log);
        let n = sessions.len();
        let split = split_dataset(sessions, SplitRatios::default(), seed).unwrap();
        prop_assert_eq!(split.train.len() + split.valid.len() + split.test.len(), n);
        let ids = |v: &[Session]| v.iter().map(|s| s.session_id.clone()).collect::<HashSet<_>>();
        prop_assert!(ids(&split.train).is_disjoint(&ids(&split.test)));
        prop_assert!(ids(&split.valid).is_disjoint(&ids(&split.test)));

        let part = partition_cold_start(&split);
        let known = KnownIds::from_sessions(&split.train);
        let mut union = HashSet::new();
        for kind in ColdStartKind::ALL {
            for s in part.get(kind) {
                prop_assert!(union.insert(s.session_id.clone()));
                prop_assert_eq!(ColdStartKind::classify(s, &known), kind);
            }
        }
        prop_assert_eq!(union, ids(&split.test));
    }

    #[test]
    fn graphs_ignore_session_order(log in pages(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let sessions = ingest(&log);
        let mut shuffled = sessions.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(build_query_graph(&sessions), build_query_graph(&shuffled));
        prop_assert_eq!(build_doc_graph(&sessions), build_doc_graph(&shuffled));
    }

    #[test]
    fn samples_are_self_first_and_drawn_from_neighbors(log in pages(), k in 1usize..6, seed in any::<u64>(), balanced in any::<bool>()) {
        let g = build_doc_graph(&ingest(&log));
        let policy = if balanced { SamplingPolicy::Balanced } else { SamplingPolicy::Uniform };
        let sample = sample_neighbors(&g, k, seed, policy).unwrap();
        for node in 0..g.node_count() as u32 {
            let s = sample.get(node).unwrap();
            prop_assert_eq!(s.len(), k);
            prop_assert_eq!(s[0], node);
            let adj: HashSet<u32> = g.neighbors(node).iter().map(|&(v, _)| v).collect();
            let drawn: Vec<u32> = s[1..].iter().copied().filter(|&v| v != node).collect();
            prop_assert!(drawn.iter().all(|v| adj.contains(v)));
            prop_assert_eq!(drawn.iter().collect::<HashSet<_>>().len(), drawn.len());
            prop_assert_eq!(drawn.len(), (k - 1).min(adj.len()));
        }
    }

    #[test]
    fn ndcg_is_bounded_and_invariant_to_monotone_rescoring(
        scores in prop::collection::vec(-5.0f64..5.0, 1..10),
        grades_seed in prop::collection::vec(0u8..5, 10),
        k in 1usize..11,
    ) {
        let grades = &grades_seed[..scores.len()];
        let a = ndcg_at_k(&scores, grades, k).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| 3.0 * s.exp() + 1.0).collect();
        let b = ndcg_at_k(&moved, grades, k).unwrap();
        prop_assert_eq!(a, b);
        if let Some(v) = a {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
        let mut ideal = scores.clone();
        for (s, &g) in ideal.iter_mut().zip(grades) {
            *s = g as f64;
        }
        if let Some(v) = ndcg_at_k(&ideal, grades, k).unwrap() {
            prop_assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_weights_sum_to_one(
        seed in any::<u64>(), n in 1usize..5, k in 1usize..5, heads in 1usize..4, concat in any::<bool>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = 2 * heads;
        let cfg = GatConfig {
            heads,
            aggregation: if concat { Aggregation::Concat } else { Aggregation::Average },
            k,
            leaky_slope: 0.2,
        };
        let mut store = ParamStore::new();
        let layer = GatLayer::new(&mut store, "g", width, cfg, &mut rng).unwrap();
        let inter = NeighborInteraction::new(&mut store, "i", width, 0.2, &mut rng).unwrap();
        let mut tape = Tape::new(&store);
        let c = tape.constant(Matrix::from_shape_fn((n, width), |(i, j)| ((i * 7 + j * 3 + seed as usize % 11) as f64).sin() * 4.0));
        let v = tape.constant(Matrix::from_shape_fn((n * k, width), |(i, j)| ((i * 5 + j) as f64).cos() * 4.0));
        let mut all = Vec::new();
        for h in 0..heads {
            all.push(layer.head_weights(&mut tape, h, c, v).unwrap());
        }
        all.push(inter.forward(&mut tape, c, v, k).unwrap().1);
        for w in all {
            for row in tape.value(w).rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn combinations_stay_in_probability_range(e in 0.0f64..1.0, a in 0.0f64..1.0, seed in any::<u64>()) {
        for kind in [CombinationKind::Mul, CombinationKind::ExpMul, CombinationKind::Linear, CombinationKind::Nonlinear] {
            let mut store = ParamStore::new();
            let comb = Combination::new(&mut store, kind, 4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut tape = Tape::new(&store);
            let ev = tape.constant(Matrix::from_elem((1, 1), e.clamp(PROB_EPS, 1.0 - PROB_EPS)));
            let av = tape.constant(Matrix::from_elem((1, 1), a.clamp(PROB_EPS, 1.0 - PROB_EPS)));
            let p = comb.forward(&mut tape, ev, av, 0.2).unwrap();
            let p = tape.scalar(p);
            prop_assert!((PROB_EPS..=1.0 - PROB_EPS).contains(&p));
        }
    }

    #[test]
    fn em_objective_is_monotone_and_probabilities_valid(log in pages()) {
        let sessions = ingest(&log);
        for kind in BaselineKind::ALL {
            let (model, trace) = Baseline::fit(kind, &sessions, &EmConfig::default()).unwrap();
            prop_assert!(trace.objective.windows(2).all(|w| w[1] >= w[0] - 1e-10), "{:?}", trace.objective);
            for s in &sessions {
                for p in model.predict_clicks(s) {
                    prop_assert!((0.0..=1.0).contains(&p));
                }
            }
        }
    }

    #[test]
    fn pbm_ignores_click_history(log in pages()) {
        let sessions = ingest(&log);
        let (model, _) = Baseline::fit(BaselineKind::Pbm, &sessions, &EmConfig::default()).unwrap();
        for s in &sessions {
            let mut flipped = s.clone();
            for q in &mut flipped.queries {
                for imp in &mut q.impressions {
                    imp.click = !imp.click;
                }
            }
            prop_assert_eq!(model.predict_clicks(s), model.predict_clicks(&flipped));
        }
    }
}
