use std::sync::Arc;

use scenesynth::corpus::{
    anchor_frame, bedroom_config, default_bedroom_spec, default_livingroom_spec, generate_corpus, livingroom_config,
    to_anchor_frame, AnchorSpec, CorpusSpec, ObjectSpec, PatternSpec, SatelliteSpec, Site,
};
use scenesynth::scene::{frobenius_sq, CategoryConfig};

fn object(category: &str, multiplicity: &[f64], size: [f64; 3]) -> ObjectSpec {
    ObjectSpec {
        category: category.into(),
        multiplicity: multiplicity.to_vec(),
        size,
        size_std: 0.0,
        elevation: 0.0,
    }
}

fn pair_spec(n: usize, offset_std: f64, seed: u64) -> CorpusSpec {
    CorpusSpec {
        n,
        patterns: vec![PatternSpec {
            anchor: AnchorSpec {
                object: object("bed", &[0.0, 1.0], [2.0, 1.5, 0.5]),
                sites: vec![Site {
                    position: [0.3, -0.2],
                    heading: 0.7,
                }],
                position_std: 0.0,
                heading_std: 0.0,
            },
            satellites: vec![SatelliteSpec {
                object: object("stand", &[0.0, 1.0], [0.4, 0.4, 0.5]),
                offsets: vec![[0.8, -0.5]],
                offset_std,
                heading_offset: 0.0,
                heading_offset_std: 0.0,
            }],
        }],
        quarter_turns: false,
        rotation_jitter_std: 0.0,
        translation_std: 0.0,
        shuffle_slots: false,
        descriptor_std: 0.0,
        seed,
    }
}

fn pair_config() -> Arc<CategoryConfig> {
    Arc::new(CategoryConfig::uniform(&["bed", "stand"], 2, 2).unwrap())
}

#[test]
fn noiseless_single_scene_sits_at_pattern_means() {
    let cfg = pair_config();
    let c = generate_corpus(&pair_spec(1, 0.0, 3), &cfg).unwrap();
    let s = &c.scenes[0];
    let bed = &s.columns[0];
    assert_eq!(bed.center, [0.3, -0.2, 0.25]);
    assert_eq!(bed.size, [2.0, 1.5, 0.5]);
    let stand = &s.columns[2];
    assert!(stand.exists());
    let (origin, _, front) = anchor_frame([0.3, -0.2], bed.front, 2.0);
    let local = to_anchor_frame([stand.center[0], stand.center[1]], origin, front);
    assert!((local[0] - 0.8).abs() < 1e-12 && (local[1] + 0.5).abs() < 1e-12, "{local:?}");
    assert_eq!(s.num_existing(), 2);
}

#[test]
fn same_seed_same_corpus() {
    let cfg = Arc::new(bedroom_config(4).unwrap());
    let mut spec = default_bedroom_spec();
    spec.n = 20;
    let a = generate_corpus(&spec, &cfg).unwrap();
    let b = generate_corpus(&spec, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ground_truth_undoes_nuisance() {
    let cfg = Arc::new(bedroom_config(4).unwrap());
    let mut spec = default_bedroom_spec();
    spec.n = 50;
    let c = generate_corpus(&spec, &cfg).unwrap();
    for (i, s) in c.scenes.iter().enumerate() {
        let back = c.truth.undo(i, s).unwrap();
        assert!(frobenius_sq(&back, &c.truth.canonical[i]) < 1e-24);
        assert_eq!(back.category_counts(), c.truth.canonical[i].category_counts());
    }
}

#[test]
fn empirical_offset_mean_matches_spec() {
    let cfg = pair_config();
    let std = 0.1;
    let n = 10_000;
    let c = generate_corpus(&pair_spec(n, std, 17), &cfg).unwrap();
    let mut sum = [0.0; 2];
    for s in &c.truth.canonical {
        let bed = &s.columns[0];
        let (origin, _, front) = anchor_frame([bed.center[0], bed.center[1]], bed.front, bed.size[0]);
        let p = to_anchor_frame([s.columns[2].center[0], s.columns[2].center[1]], origin, front);
        sum[0] += p[0];
        sum[1] += p[1];
    }
    let se = std / (n as f64).sqrt();
    assert!((sum[0] / n as f64 - 0.8).abs() < 3.0 * se);
    assert!((sum[1] / n as f64 + 0.5).abs() < 3.0 * se);
}

#[test]
fn multiplicity_frequencies_pass_chi_square() {
    let cfg = Arc::new(bedroom_config(2).unwrap());
    let mut spec = default_bedroom_spec();
    spec.n = 5000;
    let c = generate_corpus(&spec, &cfg).unwrap();
    let k = cfg.index_of("window").unwrap();
    let probs = &spec.patterns[2].anchor.object.multiplicity;
    let mut observed = vec![0.0; probs.len()];
    for s in &c.scenes {
        observed[s.category_counts()[k]] += 1.0;
    }
    let chi2: f64 = observed
        .iter()
        .zip(probs)
        .map(|(o, p)| (o - p * spec.n as f64).powi(2) / (p * spec.n as f64))
        .sum();
    // 99.9% quantile of χ² with 3 degrees of freedom.
    assert!(chi2 < 16.27, "chi2 = {chi2}");
}

#[test]
fn vocabularies_contain_anchor_pairs() {
    let bed = bedroom_config(4).unwrap();
    for name in ["bed", "stand", "desk", "chair", "window", "television"] {
        assert!(bed.index_of(name).is_some(), "{name}");
    }
    let living = livingroom_config(4).unwrap();
    for name in ["sofa", "television", "table", "plant"] {
        assert!(living.index_of(name).is_some(), "{name}");
    }
    default_livingroom_spec().validate(&living).unwrap();
}

#[test]
fn invalid_multiplicity_is_rejected() {
    let cfg = pair_config();
    let mut spec = pair_spec(1, 0.0, 0);
    spec.patterns[0].anchor.object.multiplicity = vec![0.5, 0.6];
    assert!(generate_corpus(&spec, &cfg).is_err());
    spec.patterns[0].anchor.object.multiplicity = vec![0.25; 4];
    assert!(generate_corpus(&spec, &cfg).is_err());
}
