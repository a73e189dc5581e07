mod common;

use common::gradcheck::{batch_for, gradient_suite, model_instance, random_sessions, small_config};
use common::FD_TOLERANCE;
use graphcm::model::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ops_and_paths_match_finite_differences() {
    let results = gradient_suite(2, 3);
    let mut failures = Vec::new();
    for r in &results {
        if !(r.worst < FD_TOLERANCE) {
            failures.push(format!("{}: {:e} at {}", r.name, r.worst, r.at));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn examination_ignores_query_and_document_ids() {
    let cfg = small_config();
    let (mut model, batch) = model_instance(&cfg, 11, false);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let before = {
        let fwd = model.forward(&batch, false, &mut rng).unwrap();
        fwd.tape.value(fwd.examination).clone()
    };
    let ids: Vec<_> = model
        .store
        .iter()
        .filter(|(_, n, _)| *n == "emb.query" || *n == "emb.doc")
        .map(|(i, _, _)| i)
        .collect();
    for id in ids {
        model.store.get_mut(id).mapv_inplace(|v| -3.0 * v + 0.7);
    }
    let fwd = model.forward(&batch, false, &mut rng).unwrap();
    assert_eq!(fwd.tape.value(fwd.examination), &before);
}

#[test]
fn predictions_depend_only_on_the_past() {
    let cfg = small_config();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sessions, corpus) = random_sessions(&mut rng);
        let inputs = GraphInputs::from_training(&sessions);
        let dims = ModelDims {
            queries: corpus.queries.len(),
            docs: corpus.docs.len(),
            verticals: corpus.verticals.len(),
            max_position: 3,
        };
        let model = GraphCm::new(cfg.clone(), dims, &mut rng).unwrap();
        let predict = |s: &[graphcm::session_log::Session]| {
            let batch = batch_for(&cfg, s, &inputs, 9, true);
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let fwd = model.forward(&batch, false, &mut r).unwrap();
            fwd.per_session(&batch, fwd.click)
        };
        let base = predict(&sessions);
        // rewrite the final result of session 0: another document, flipped click
        let mut changed = sessions.clone();
        let page = changed[0].queries.last_mut().unwrap();
        let other = page.impressions[0].doc;
        let imp = page.impressions.last_mut().unwrap();
        imp.click = !imp.click;
        imp.doc = other;
        let after = predict(&changed);
        let n = base[0].len();
        assert_eq!(after[0][..n - 1], base[0][..n - 1], "seed {seed}");
        assert_eq!(after[1..], base[1..], "seed {seed}");
    }
}
