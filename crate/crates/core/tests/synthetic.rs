use skillpop::baselines::llda_train;
use skillpop::model::{train, Corpus, Hyperparameters, TrainConfig, TrainedModel};
use skillpop::synth::{generate_corpus, recovery_error, total_variation, GroundTruth, SynthSpec};

fn hp(k: usize, gamma: f64) -> Hyperparameters {
    Hyperparameters {
        alpha: 0.5,
        beta: 0.05,
        delta: 1.0,
        gamma,
        num_topics: k,
    }
}

/// Per-topic empirical skill frequencies of the generated tokens.
fn empirical(truth: &GroundTruth) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; truth.num_skills()]; truth.num_topics];
    for t in truth.tokens.iter().flatten() {
        counts[t.topic][t.skill] += 1.0;
    }
    for row in &mut counts {
        let n: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= n);
    }
    counts
}

fn mean_tv(truth: &GroundTruth) -> f64 {
    let emp = empirical(truth);
    (0..truth.num_topics)
        .map(|k| total_variation(&emp[k], &truth.topic_skill_distribution(k)))
        .sum::<f64>()
        / truth.num_topics as f64
}

#[test]
fn token_frequencies_approach_the_truth() {
    let h = hp(6, 0.5);
    let (_, small) = generate_corpus(&h, &SynthSpec::new(120, 6, 200, 100), 3).unwrap();
    let (_, large) = generate_corpus(&h, &SynthSpec::new(120, 6, 200, 1000), 3).unwrap();
    let (a, b) = (mean_tv(&small), mean_tv(&large));
    eprintln!("mean TV at N=100: {a:.4}, N=1000: {b:.4}");
    assert!(b < 0.05);
    assert!(b < a);
}

#[test]
fn generation_is_deterministic_and_masked() {
    let h = hp(5, 0.3);
    let spec = SynthSpec::new(30, 3, 40, 20);
    let (docs, truth) = generate_corpus(&h, &spec, 9).unwrap();
    let (docs2, truth2) = generate_corpus(&h, &spec, 9).unwrap();
    assert_eq!(docs, docs2);
    assert_eq!(truth, truth2);
    for (m, d) in docs.iter().enumerate() {
        assert!(!d.lambda.is_empty());
        assert_eq!(d.len(), 20);
        assert_eq!(d.lambda, truth.lambda[m]);
        for (k, &p) in truth.theta[m].iter().enumerate() {
            if !d.allows(k) {
                assert_eq!(p, 0.0);
            }
        }
        assert!((truth.theta[m].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((truth.pi[m].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for t in &truth.tokens[m] {
            assert!(d.allows(t.topic));
            assert_eq!(t.category, truth.skill_categories[t.skill]);
        }
    }
    for per_topic in &truth.phi {
        for dist in per_topic {
            assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
    let mut dump = Vec::new();
    truth.write_json(&mut dump).unwrap();
    assert_eq!(GroundTruth::read_json(dump.as_slice()).unwrap(), truth);
}

#[test]
fn degenerate_and_limiting_dimensions() {
    let (docs, truth) = generate_corpus(&hp(1, 0.5), &SynthSpec::new(10, 1, 5, 30), 1).unwrap();
    assert!(docs.iter().all(|d| d.lambda == vec![0]));
    assert!(truth.tokens.iter().flatten().all(|t| t.topic == 0 && t.category == 0));

    let (docs, _) = generate_corpus(&hp(6, 1.0 - 1e-12), &SynthSpec::new(12, 2, 50, 5), 2).unwrap();
    assert!(docs.iter().all(|d| d.lambda == (0..6).collect::<Vec<_>>()));

    assert!(generate_corpus(&hp(2, 0.5), &SynthSpec::new(3, 4, 5, 5), 0).is_err());
    assert!(generate_corpus(&hp(2, 0.5), &SynthSpec::new(8, 2, 0, 5), 0).is_err());
}

#[test]
fn truth_shaped_counts_recover_exactly() {
    let h = hp(3, 0.5);
    let (_, truth) = generate_corpus(&h, &SynthSpec::new(12, 2, 30, 40), 4).unwrap();
    let s = truth.num_skills();
    let mut counts = vec![0u64; s * 3];
    for j in 0..3 {
        let q = truth.topic_skill_distribution(j);
        for w in 0..s {
            counts[w * 3 + j] = (q[w] * 1e9).round() as u64;
        }
    }
    let tight = Hyperparameters { beta: 1e-6, ..h };
    let model = TrainedModel::from_counts(tight, truth.skill_categories.clone(), 2, counts, &[1, 1], vec![1.0; 3]).unwrap();
    let report = recovery_error(&model, &truth).unwrap();
    assert!(report.mean <= 1e-3, "{report:?}");

    let wrong = TrainedModel::from_counts(tight, vec![0; 5], 1, vec![0; 15], &[0], vec![1.0; 3]).unwrap();
    assert!(recovery_error(&wrong, &truth).is_err());
}

/// SPTM and LLDA fitted to the same category-structured synthetic corpus:
/// per-seed recovery error of each against the generating distributions.
fn recovery_pair(seed: u64) -> (f64, f64) {
    let h = hp(6, 0.5);
    let (docs, truth) = generate_corpus(&h, &SynthSpec::new(120, 6, 200, 100), seed).unwrap();
    let corpus = Corpus::from_documents(docs, truth.skill_categories.clone(), 6, 6).unwrap();
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let sptm = train(&corpus, &h, &config).unwrap();
    let llda = llda_train(&corpus, &h, &config).unwrap();
    (
        recovery_error(&sptm, &truth).unwrap().mean,
        recovery_error(&llda, &truth).unwrap().mean,
    )
}

#[test]
fn sptm_recovers_category_structure_better_than_llda() {
    let mut wins = 0;
    for seed in 0..10 {
        let (sptm, llda) = recovery_pair(seed);
        eprintln!("seed {seed}: sptm {sptm:.5}, llda {llda:.5}");
        if sptm < llda {
            wins += 1;
        }
    }
    assert!(wins >= 8, "SPTM recovery strictly better in only {wins}/10 seeds");
}
