use std::collections::BTreeSet;

use credcrf::ccrf::{train_ccrf, CcrfSettings, Column, ColumnIndex, DesignMatrix};
use credcrf::corpus::synth::{generate_synthetic, SynthConfig};
use credcrf::corpus::RatingView;
use credcrf::eval::{cross_validate, hypothesis_suite, EvalSettings};
use credcrf::pipeline::ModelSettings;
use credcrf::stylistic::Lexicon;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn eval_settings(seed: u64) -> EvalSettings {
    EvalSettings {
        model: ModelSettings {
            k_topics: 6,
            gibbs_iters: 100,
            seed,
            ..ModelSettings::default()
        },
        ..EvalSettings::default()
    }
}

#[test]
fn noise_free_corpus_is_learnable() {
    let (g, _) = generate_synthetic(&SynthConfig::noise_free(), 1).unwrap();
    let report = cross_validate(&g, &Lexicon::default_bundle(), &eval_settings(1)).unwrap();
    assert!(report.mean_mse() < 0.05, "mean MSE {}", report.mean_mse());
    assert_eq!(
        report.folds.iter().map(|f| f.test_size).sum::<usize>(),
        report.articles
    );
    assert_eq!(report.blind_reads(), 0);
}

#[test]
fn cross_validation_is_deterministic() {
    let cfg = SynthConfig {
        n_articles: 60,
        ..SynthConfig::default()
    };
    let (g, _) = generate_synthetic(&cfg, 5).unwrap();
    let mut s = eval_settings(5);
    s.folds = 3;
    s.jobs = 2;
    let a = cross_validate(&g, &Lexicon::default_bundle(), &s).unwrap();
    s.jobs = 1;
    let b = cross_validate(&g, &Lexicon::default_bundle(), &s).unwrap();
    assert_eq!(a.folds, b.folds);
    assert_eq!(a.final_model, b.final_model);
}

#[test]
fn clean_predictor_outweighs_noisy_one() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = ColumnIndex::new(vec![Column::Language, Column::Topic]).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for j in 0..120 {
            let t: f64 = rng.random_range(1.0..5.0);
            let z: f64 = rng.sample(StandardNormal);
            rows.push((format!("a{j}"), vec![(0, t), (1, t + 1.2 * z)]));
            y.push(t);
        }
        let d = DesignMatrix::from_predictions(cols, rows, Some(y)).unwrap();
        let m = train_ccrf(&d, &CcrfSettings::default()).unwrap();
        assert!(m.lambda[0] > m.lambda[1], "seed {seed}: {:?}", m.lambda);
    }
}

#[test]
fn source_quality_shows_in_hypotheses() {
    let (g, _) = generate_synthetic(&SynthConfig::default(), 3).unwrap();
    let results = hypothesis_suite(&g, 3);
    let src = results
        .iter()
        .find(|h| h.name == "source-vs-credibility")
        .unwrap();
    assert!(src.outcome.as_ref().unwrap().r > 0.0);
    let fb = results
        .iter()
        .find(|h| h.name == "expertise-vs-feedback")
        .unwrap();
    assert!(fb.outcome.as_ref().unwrap().r > 0.0);
}

#[test]
fn view_counts_blind_reads() {
    let cfg = SynthConfig {
        n_articles: 10,
        ..SynthConfig::default()
    };
    let (g, _) = generate_synthetic(&cfg, 0).unwrap();
    let blind: BTreeSet<String> = ["a0000".to_string()].into();
    let view = RatingView::new(&g, blind);
    let _ = view.article_rating("a0001");
    assert_eq!(view.blind_reads(), 0);
    let _ = view.article_rating("a0000");
    let idx = g.clique("a0000").unwrap().review_ids[0];
    let _ = view.review_rating(idx);
    assert_eq!(view.blind_reads(), 2);
}
