mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{fixtures, random_graph, FormGen};
use tablequery::dataset;
use tablequery::exec::{self, Denotation, ExecError};
use tablequery::feat::{featurize, partial_featurize, FeatureVector};
use tablequery::fixture::olympics_graph;
use tablequery::learn::{self, Model, TrainConfig};
use tablequery::parser::{self, ParserConfig, RuleSet, Utterance};
use tablequery::dcs;

const WORDS: &[&str] = &[
    "which", "city", "year", "how", "many", "nations", "most", "first", "last", "Athens",
    "Greece", "2004", "before", "after", "more", "than", "20", "total", "country", "in",
];

fn question() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 2..7).prop_map(|w| w.join(" "))
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_sums_to_one(ws in weights(), n in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Model::default();
        for (i, w) in ws.iter().enumerate() {
            m.weights.insert(format!("f{}", i), *w);
        }
        let feats: Vec<FeatureVector> = (0..n)
            .map(|_| {
                let mut f = FeatureVector::new();
                for i in 0..ws.len() {
                    if rand::Rng::gen_bool(&mut rng, 0.5) {
                        f.fire(format!("f{}", i));
                    }
                }
                f
            })
            .collect();
        let lp = learn::candidate_logprobs(&m, &feats).unwrap();
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn well_typed_forms_never_hit_type_failures(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_graph(&mut rng);
        let z = FormGen { w: &w, rng: &mut rng }.sample(9);
        prop_assert!(dcs::typecheck(&z, &w).is_ok());
        let r = exec::execute(&z, &w);
        prop_assert!(!matches!(r, Err(ExecError::TypeFailure(_))), "{} -> {:?}", z, r);
    }

    #[test]
    fn partial_features_are_a_subset_of_full(q in question(), seed in any::<u64>()) {
        let w = olympics_graph();
        let x = Utterance::new(&q);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = FormGen { w: &w, rng: &mut rng }.sample(7);
        let den = exec::execute(&z, &w).unwrap_or_default();
        let full = featurize(&x, &w, &z, &den);
        for name in partial_featurize(&x, &w, &z).names() {
            prop_assert!(full.contains(name), "{} missing from full features of {}", name, z);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn more_rules_never_lose_candidates(q in question()) {
        let w = olympics_graph();
        let x = Utterance::new(&q);
        let forms = |rule_set| -> BTreeSet<String> {
            let cfg = ParserConfig {
                rule_set,
                beam_size: usize::MAX,
                max_size: 5,
                ..ParserConfig::default()
            };
            parser::parse(&x, &w, &Model::default(), &cfg).into_iter().map(|d| d.canonical).collect()
        };
        let sets: Vec<_> = [RuleSet::JoinOnly, RuleSet::JoinCount, RuleSet::JoinCountSuperlative, RuleSet::Full]
            .into_iter()
            .map(forms)
            .collect();
        for pair in sets.windows(2) {
            prop_assert!(pair[0].is_subset(&pair[1]));
        }
    }
}

#[test]
fn empty_denotation_has_no_answer() {
    assert!(!learn::answer_matches(&Denotation::default(), &["2".to_string()]));
}

#[test]
fn objective_rises_over_passes() {
    let dir = fixtures();
    let data = dataset::load_dataset(&dir.join("mini.tsv")).unwrap();
    let tables = dataset::load_tables(&data, &dir).unwrap();
    let tcfg = TrainConfig {
        l1: 0.0,
        eta0: 0.5,
        passes: 3,
        ..TrainConfig::default()
    };
    let (_, report) = learn::train(&data, &tables, &ParserConfig::default(), &tcfg).unwrap();
    let ll: Vec<f64> = report.passes.iter().map(|p| p.mean_loglik).collect();
    assert!(ll.windows(2).all(|p| p[0] <= p[1]), "{:?}", ll);
    assert!(report.final_metrics.correct <= report.final_metrics.oracle);
}
