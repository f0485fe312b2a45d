use hiereval::dataset::{
    parse_dataset_str, parse_predictions, Dataset, LoadOptions, PredictionMode, PredictionSet,
};
use hiereval::metrics::{build_pairs, evaluate, ground_truth_queries, score_queries, EvalOptions};
use hiereval::{Execution, Fraction, Level, Specificity};
use hiereval_testkit::fixture::{queries_json, random_fixture, random_queries, Fixture, Payload};
use hiereval_testkit::{oracle, rng};
use proptest::prelude::*;
use rand::Rng;

fn load(fx: &Fixture) -> Dataset {
    parse_dataset_str(&fx.to_json(), &LoadOptions::default()).unwrap()
}

fn query_set(
    fx: &Fixture,
    ds: &Dataset,
    queries: &[hiereval_testkit::fixture::Query],
) -> PredictionSet {
    parse_predictions(
        &queries_json(fx, "m", queries),
        PredictionMode::Query,
        ds,
        true,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_match_pixel_counts(seed in any::<u64>()) {
        let mut r = rng(seed);
        let nested = r.gen_bool(0.5);
        let fx = random_fixture(&mut r, 24, nested);
        let ds = load(&fx);
        let queries = random_queries(&mut r, &fx);
        let set = query_set(&fx, &ds, &queries);
        let mut got: Vec<(usize, String, &str, Fraction)> = score_queries(&set, &ds, &Execution::sequential())
            .into_iter()
            .map(|s| (s.image, ds.path_of(s.category).to_string(), s.specificity.as_str(), s.iou))
            .collect();
        got.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));
        let want = oracle::query_scores(&fx, &queries);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!((g.0, g.1.as_str(), g.2), (w.image, w.category.as_str(), w.specificity));
            let expect = if w.union == 0 { Fraction::ONE } else { Fraction::new(w.inter, w.union) };
            prop_assert_eq!((g.3.num, g.3.den), (expect.num, expect.den));
        }
    }

    #[test]
    fn parallel_matches_sequential(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fx = random_fixture(&mut r, 24, true);
        let ds = load(&fx);
        let set = query_set(&fx, &ds, &random_queries(&mut r, &fx));
        let opts = EvalOptions::default();
        let a = evaluate(&set, &ds, &opts, &Execution::sequential());
        let b = evaluate(&set, &ds, &opts, &Execution::with_workers(4));
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn ground_truth_is_perfect(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fx = random_fixture(&mut r, 24, true);
        let ds = load(&fx);
        for sp in Specificity::ALL {
            let set = ground_truth_queries(&ds, sp);
            for s in score_queries(&set, &ds, &Execution::sequential()) {
                prop_assert_eq!(s.iou.num, s.iou.den);
            }
            for p in build_pairs(&set, &ds, &Execution::sequential()).pairs {
                prop_assert_eq!(p.containment.num, p.containment.den);
            }
        }
    }
}

#[test]
fn abstaining_everywhere_scores_zero() {
    let mut r = rng(11);
    let fx = random_fixture(&mut r, 24, true);
    let ds = load(&fx);
    // Only categories present on the image: abstaining on an absent one is agreement.
    let mut queries = random_queries(&mut r, &fx);
    queries.retain(|q| fx.truth(q.image, &q.category).area() > 0);
    assert!(!queries.is_empty());
    for q in &mut queries {
        q.payload = Payload::Abstain;
    }
    let report = evaluate(
        &query_set(&fx, &ds, &queries),
        &ds,
        &EvalOptions::default(),
        &Execution::sequential(),
    );
    for sp in Specificity::ALL {
        let Some(s) = report.get(sp) else { continue };
        for level in Level::ALL {
            let m = s.miou.get(level);
            assert!(m.n == 0 || m.value == Some(0.0), "{level:?}: {:?}", m.value);
        }
        assert_eq!(s.spcs.avg.value, None);
    }
}
